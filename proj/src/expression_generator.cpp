#include "linet/expression_generator.hpp"

namespace linet {

std::string composition_name(Composition c) {
  switch (c) {
    case Composition::teacher: return "teacher";
    case Composition::vanilla: return "vanilla";
    case Composition::with_t: return "vanilla+T";
    case Composition::full: return "vanilla+T+R";
  }
  return "unknown";
}

Composition parse_composition(const std::string& name) {
  for (Composition c : {Composition::teacher, Composition::vanilla, Composition::with_t, Composition::full})
    if (composition_name(c) == name) return c;
  throw ConfigError("unknown composition '" + name + "'");
}

}  // namespace linet
