#pragma once

#include <filesystem>
#include <iosfwd>

#include "ccf/parameter_store.hpp"

namespace ccf {

/// Line-oriented text checkpoint:
///   ccf-model v1 dim=<k> hash_bits=<b|none>
///   U <id> <k reals>        user factors, sorted by id
///   I <id> <k reals>        item factors, sorted by id
///   T <id> <real>           per-user thresholds, when enabled
///   M <row> <n reals>       content matrix rows, in order
/// Reals are printed with 17 significant digits, so save/load round-trips
/// exactly. A hashed store persists its gathered per-entity views; reload
/// scatters them back into a fresh table.
class Checkpoint {
 public:
  static void save(std::ostream& out, const ParameterStore& store);
  static void save(const std::filesystem::path& path, const ParameterStore& store);
  static ParameterStore load(std::istream& in);
  static ParameterStore load(const std::filesystem::path& path);
};

inline void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store) {
  Checkpoint::save(path, store);
}
inline ParameterStore load_checkpoint(const std::filesystem::path& path) {
  return Checkpoint::load(path);
}

}  // namespace ccf
