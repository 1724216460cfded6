// SPDX-License-Identifier: Apache-2.0
#ifndef STARBEAM_VERSION_HPP
#define STARBEAM_VERSION_HPP

namespace starbeam {

inline constexpr const char* library_version = "0.1.0";

}  // namespace starbeam

#endif
