// SPDX-License-Identifier: Apache-2.0
// Internal helpers shared by the HTTP oracle and backend.
#pragma once

#include <string>
#include <string_view>

#include "abo/error.hpp"

namespace abo::detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // starts with '/'
};

inline SplitUrl split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos)
    throw Error(ErrorCode::InvalidConfig, "URL needs a scheme: " + std::string(url));
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

}  // namespace abo::detail
