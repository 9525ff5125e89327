#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ipcc/error.hpp"

namespace ipcc::json_io {

using Json = nlohmann::json;

/// Rewrites bare NaN / Infinity / -Infinity tokens (as emitted by e.g.
/// Python's json module) to null so they can be reported as non-finite
/// values instead of generic parse errors. String contents are untouched.
inline std::string neutralize_nonfinite_tokens(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < text.size()) {
        out.push_back(text[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    auto starts = [&](std::string_view token) { return text.compare(i, token.size(), token) == 0; };
    if (starts("-Infinity")) {
      out += "null";
      i += 8;
    } else if (starts("Infinity")) {
      out += "null";
      i += 7;
    } else if (starts("NaN")) {
      out += "null";
      i += 2;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline Json read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    return Json::parse(neutralize_nonfinite_tokens(buffer.str()));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

inline void write_file(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << doc.dump(1) << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline const Json& field(const Json& obj, const char* name) {
  if (!obj.is_object()) throw Error(ErrorKind::Parse, "expected a JSON object");
  auto it = obj.find(name);
  if (it == obj.end()) throw Error(ErrorKind::Parse, std::string("missing field '") + name + "'");
  return *it;
}

inline double number(const Json& v, const char* what) {
  if (v.is_null()) throw Error(ErrorKind::NonFinite, std::string(what) + " is not finite");
  if (!v.is_number()) throw Error(ErrorKind::Parse, std::string(what) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, std::string(what) + " is not finite");
  return x;
}

inline const Json& array(const Json& v, std::size_t expected, const char* what) {
  if (!v.is_array()) throw Error(ErrorKind::Parse, std::string(what) + " must be an array");
  if (v.size() != expected) {
    throw Error(ErrorKind::Shape, std::string(what) + " has length " + std::to_string(v.size()) +
                                      ", expected " + std::to_string(expected));
  }
  return v;
}

inline long long integer(const Json& v, const char* what) {
  if (!v.is_number_integer()) throw Error(ErrorKind::Parse, std::string(what) + " must be an integer");
  return v.get<long long>();
}

}  // namespace ipcc::json_io
