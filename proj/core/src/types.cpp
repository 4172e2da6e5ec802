#include "duogesture/types.hpp"

#include <string>

#include "duogesture/errors.hpp"

namespace duogesture {

std::string_view region_name(Region r) {
  switch (r) {
    case Region::hand:
      return "hand";
    case Region::upper:
      return "upper";
    case Region::lower:
      return "lower";
    case Region::face:
      return "face";
  }
  return "?";
}

Region region_from_name(std::string_view name) {
  for (Region r : kAllRegions) {
    if (region_name(r) == name) return r;
  }
  throw DataError("unknown region name '" + std::string(name) + "'");
}

}  // namespace duogesture
