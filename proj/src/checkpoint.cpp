#include "cdcp/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdcp/errors.hpp"

namespace cdcp::checkpoint {

std::string serialize(const std::string& kind, const nlohmann::json& payload) {
  const nlohmann::json doc = {{"format", kFormat}, {"version", kVersion}, {"kind", kind}, {"payload", payload}};
  return doc.dump(1) + "\n";
}

nlohmann::json parse(const std::string& text, const std::string& kind) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kFormat) throw FormatError("not a cdcp checkpoint");
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw FormatError("checkpoint has no version field");
  }
  const int version = doc["version"].get<int>();
  if (version != kVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kVersion) + ")");
  }
  if (doc.value("kind", "") != kind) {
    throw FormatError("checkpoint holds a " + doc.value("kind", std::string("?")) + " model, expected " + kind);
  }
  if (!doc.contains("payload")) throw FormatError("checkpoint has no payload");
  return doc["payload"];
}

void save(const std::string& path, const std::string& kind, const nlohmann::json& payload) {
  const std::string text = serialize(kind, payload);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out << text;
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move checkpoint to " + path);
}

nlohmann::json load(const std::string& path, const std::string& kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse(text.str(), kind);
  } catch (const VersionError& e) {
    throw VersionError(path + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace cdcp::checkpoint
