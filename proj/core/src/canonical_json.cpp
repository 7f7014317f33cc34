#include "dqlens/canonical_json.hpp"

#include "dqlens/hash.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace dqlens {
namespace {

void escape_string(const std::string& s, std::string& out) {
  static constexpr char kHex[] = "0123456789abcdef";
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          out += "\\u00";
          out.push_back(kHex[c >> 4]);
          out.push_back(kHex[c & 0x0f]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
}

template <typename Int>
void append_integer(Int v, std::string& out) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void append_double(double v, std::string& out) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

void canonical_dump(const nlohmann::json& value, std::string& out) {
  using value_t = nlohmann::json::value_t;
  switch (value.type()) {
    case value_t::null:
    case value_t::discarded:
      out += "null";
      break;
    case value_t::boolean:
      out += value.get<bool>() ? "true" : "false";
      break;
    case value_t::number_integer:
      append_integer(value.get<std::int64_t>(), out);
      break;
    case value_t::number_unsigned:
      append_integer(value.get<std::uint64_t>(), out);
      break;
    case value_t::number_float:
      append_double(value.get<double>(), out);
      break;
    case value_t::string:
      escape_string(value.get_ref<const std::string&>(), out);
      break;
    case value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& el : value) {
        if (!first) out.push_back(',');
        first = false;
        canonical_dump(el, out);
      }
      out.push_back(']');
      break;
    }
    case value_t::object: {
      // nlohmann::json objects are std::map backed, so iteration is key-sorted.
      out.push_back('{');
      bool first = true;
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        escape_string(it.key(), out);
        out.push_back(':');
        canonical_dump(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case value_t::binary:
      out += "null";
      break;
  }
}

std::string canonical_dump(const nlohmann::json& value) {
  std::string out;
  canonical_dump(value, out);
  return out;
}

std::string canonical_digest(const nlohmann::json& value) { return sha256_hex(canonical_dump(value)); }

}  // namespace dqlens
