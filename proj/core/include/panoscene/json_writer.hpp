#pragma once

#include <cstdio>
#include <string>

namespace panoscene {

/// Formats a double with 17 significant digits, the precision the on-disk
/// JSON documents are pinned to.
inline std::string json_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (uint8_t(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  return out;
}

/// Minimal append-only JSON builder that preserves field order exactly as
/// written. nlohmann::json reorders object keys, which would break the
/// documented field order of the camera and alignment documents.
class JsonWriter {
public:
  JsonWriter& begin_object() { return token("{"); }
  JsonWriter& end_object() {
    out_ += "}";
    return *this;
  }
  JsonWriter& begin_array() { return token("["); }
  JsonWriter& end_array() {
    out_ += "]";
    return *this;
  }

  JsonWriter& key(const std::string& k) { return token("\"" + json_escape(k) + "\":"); }

  JsonWriter& value(double v) { return token(json_double(v)); }
  JsonWriter& value(int v) { return token(std::to_string(v)); }
  JsonWriter& value(long v) { return token(std::to_string(v)); }
  JsonWriter& value(size_t v) { return token(std::to_string(v)); }
  JsonWriter& value(bool v) { return token(v ? "true" : "false"); }
  JsonWriter& value(const std::string& v) { return token("\"" + json_escape(v) + "\""); }
  JsonWriter& value(const char* v) { return value(std::string(v)); }

  const std::string& str() const { return out_; }

private:
  JsonWriter& token(const std::string& t) {
    if (!out_.empty()) {
      const char last = out_.back();
      if (last != '{' && last != '[' && last != ':') {
        out_ += ",";
      }
    }
    out_ += t;
    return *this;
  }

  std::string out_;
};

}  // namespace panoscene
