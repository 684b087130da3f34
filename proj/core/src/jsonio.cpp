#include "evenres/jsonio.hpp"

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evenres/errors.hpp"

namespace evenres {

namespace {

void append_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void append_double(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "null";
    return;
  }
  if (std::isinf(v)) {
    out += (v > 0 ? "1e999" : "-1e999");
    return;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void dump_rec(std::string& out, const Json& j, int indent, int depth) {
  const std::string pad(static_cast<size_t>(indent) * (depth + 1), ' ');
  const std::string pad_close(static_cast<size_t>(indent) * depth, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        append_escaped(out, it.key());
        out += ": ";
        dump_rec(out, it.value(), indent, depth + 1);
      }
      out += "\n" + pad_close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        dump_rec(out, v, indent, depth + 1);
      }
      out += "\n" + pad_close + "]";
      return;
    }
    case Json::value_t::string:
      append_escaped(out, j.get_ref<const std::string&>());
      return;
    case Json::value_t::boolean:
      out += (j.get<bool>() ? "true" : "false");
      return;
    case Json::value_t::number_integer: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%" PRId64, j.get<std::int64_t>());
      out += buf;
      return;
    }
    case Json::value_t::number_unsigned: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%" PRIu64, j.get<std::uint64_t>());
      out += buf;
      return;
    }
    case Json::value_t::number_float:
      append_double(out, j.get<double>());
      return;
    default:
      out += "null";
      return;
  }
}

}  // namespace

std::string json_dump(const Json& j, int indent) {
  std::string out;
  dump_rec(out, j, indent, 0);
  out += "\n";
  return out;
}

std::string stable_hash_hex(const Json& j) {
  const std::string body = json_dump(j, 0);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : body) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

Json logpoint_to_json(const LogPoint& p) {
  Json j;
  j["modulus"] = p.modulus;
  j["argument"] = p.argument;
  return j;
}

LogPoint logpoint_from_json(const Json& j) {
  if (!j.contains("modulus") || !j.contains("argument")) {
    throw UsageError("LogPoint JSON needs fields 'modulus' and 'argument'");
  }
  return make_logpoint(j.at("modulus").get<double>(),
                       j.at("argument").get<double>());
}

void write_text_file(const std::string& path, const std::string& body) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InternalError("cannot open " + tmp.string() + " for writing");
    out << body;
    if (!out.flush()) throw InternalError("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace evenres
