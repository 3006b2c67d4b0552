#include <map>
#include <string>

#include "aqis/error.hpp"
#include "aqis/runner.hpp"

namespace aqis {

namespace detail {
const std::map<std::string, std::string>& preset_sources();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : detail::preset_sources()) names.push_back(name);
  return names;
}

json preset(const std::string& name) {
  const auto& sources = detail::preset_sources();
  const auto it = sources.find(name);
  if (it == sources.end()) throw ConfigError("preset", "no preset named '" + name + "'");
  return json::parse(it->second);
}

}  // namespace aqis
