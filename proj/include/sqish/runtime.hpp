// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace sqish {

/// Keeps large tensor buffers on the heap between batches instead of
/// returning them to the OS after every free. No-op outside glibc.
void configure_allocator();

}  // namespace sqish
