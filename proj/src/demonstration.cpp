#include "dextac/demonstration.hpp"

#include "dextac/errors.hpp"

namespace dextac {

void Demonstration::validate() const {
  const std::size_t t = timestamps.size();
  if (t == 0) throw LengthMismatch("demonstration is empty");
  auto check = [t](std::size_t n, const char* what) {
    if (n != t) {
      throw LengthMismatch(std::string(what) + " has " + std::to_string(n) + " frames, expected " +
                           std::to_string(t));
    }
  };
  check(j_glove.size(), "j_glove");
  check(p_glove.size(), "p_glove");
  check(gamma_glove.size(), "gamma_glove");
  check(p_object.size(), "p_object");
  for (const auto& cam : images) check(cam.frames.size(), "camera stream");
  for (const auto& [name, values] : scalars) check(values.size(), "scalar stream");
}

}  // namespace dextac
