#include "gsreg/ply.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "gsreg/error.hpp"

namespace gsreg {

namespace {

static_assert(std::endian::native == std::endian::little,
              "PLY I/O assumes a little-endian host");

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::optional<ScalarType> parse_type(const std::string& name) {
  static const std::map<std::string, ScalarType> kTypes = {
      {"char", ScalarType::kInt8},     {"int8", ScalarType::kInt8},
      {"uchar", ScalarType::kUInt8},   {"uint8", ScalarType::kUInt8},
      {"short", ScalarType::kInt16},   {"int16", ScalarType::kInt16},
      {"ushort", ScalarType::kUInt16}, {"uint16", ScalarType::kUInt16},
      {"int", ScalarType::kInt32},     {"int32", ScalarType::kInt32},
      {"uint", ScalarType::kUInt32},   {"uint32", ScalarType::kUInt32},
      {"float", ScalarType::kFloat32}, {"float32", ScalarType::kFloat32},
      {"double", ScalarType::kFloat64}, {"float64", ScalarType::kFloat64},
  };
  const auto it = kTypes.find(name);
  if (it == kTypes.end()) return std::nullopt;
  return it->second;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUInt8:
      return 1;
    case ScalarType::kInt16:
    case ScalarType::kUInt16:
      return 2;
    case ScalarType::kInt32:
    case ScalarType::kUInt32:
    case ScalarType::kFloat32:
      return 4;
    case ScalarType::kFloat64:
      return 8;
  }
  return 0;
}

template <typename T>
T read_as(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode(ScalarType t, const unsigned char* p) {
  switch (t) {
    case ScalarType::kInt8:
      return read_as<std::int8_t>(p);
    case ScalarType::kUInt8:
      return read_as<std::uint8_t>(p);
    case ScalarType::kInt16:
      return read_as<std::int16_t>(p);
    case ScalarType::kUInt16:
      return read_as<std::uint16_t>(p);
    case ScalarType::kInt32:
      return read_as<std::int32_t>(p);
    case ScalarType::kUInt32:
      return read_as<std::uint32_t>(p);
    case ScalarType::kFloat32:
      return read_as<float>(p);
    case ScalarType::kFloat64:
      return read_as<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
  std::size_t stride = 0;
};

struct Header {
  std::vector<Element> elements;
  std::string frame_label;
};

Header parse_header(std::istream& in, const std::string& where) {
  std::string line;
  if (!std::getline(in, line) || line != "ply") {
    throw FormatError(where + ": missing 'ply' magic");
  }
  Header header;
  bool format_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "end_header") {
      if (!format_seen) throw FormatError(where + ": header has no format line");
      return header;
    }
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt != "binary_little_endian") {
        throw FormatError(where + ": unsupported PLY format '" + fmt +
                          "' (only binary_little_endian)");
      }
      format_seen = true;
    } else if (keyword == "comment") {
      std::string tag, label;
      ls >> tag;
      if (tag == "gsreg_frame") {
        std::getline(ls >> std::ws, label);
        header.frame_label = label;
      }
    } else if (keyword == "obj_info") {
      continue;
    } else if (keyword == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (!ls) throw FormatError(where + ": malformed element line '" + line + "'");
      header.elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (header.elements.empty()) {
        throw FormatError(where + ": property before any element");
      }
      std::string type_name, name;
      ls >> type_name;
      if (type_name == "list") {
        throw FormatError(where + ": list property in element '" + header.elements.back().name +
                          "' is not supported");
      }
      ls >> name;
      const auto type = parse_type(type_name);
      if (!type || name.empty()) {
        throw FormatError(where + ": malformed property line '" + line + "'");
      }
      Element& e = header.elements.back();
      e.properties.push_back({name, *type, e.stride});
      e.stride += type_size(*type);
    } else if (!keyword.empty()) {
      throw FormatError(where + ": unknown header keyword '" + keyword + "'");
    }
  }
  throw FormatError(where + ": header is not terminated by end_header");
}

}  // namespace

GaussianCloud load_ply(const std::filesystem::path& path) {
  const std::string where = "ply " + path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(where + ": cannot open file");
  const Header header = parse_header(in, where);

  std::size_t skip_bytes = 0;
  const Element* vertex = nullptr;
  for (const auto& e : header.elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    skip_bytes += e.count * e.stride;
  }
  if (!vertex) throw FormatError(where + ": no 'vertex' element");
  in.ignore(static_cast<std::streamsize>(skip_bytes));

  std::map<std::string, const Property*> by_name;
  for (const auto& p : vertex->properties) by_name[p.name] = &p;
  auto require = [&](const std::string& name) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError(where + ": missing vertex property \"" + name + "\"");
    return it->second;
  };

  const char* fixed[] = {"x",       "y",       "z",       "f_dc_0", "f_dc_1", "f_dc_2",
                         "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                         "rot_2",   "rot_3"};
  std::vector<const Property*> fixed_props;
  for (const char* name : fixed) fixed_props.push_back(require(name));

  std::size_t rest_count = 0;
  while (by_name.count("f_rest_" + std::to_string(rest_count))) ++rest_count;
  for (const auto& [name, prop] : by_name) {
    if (name.rfind("f_rest_", 0) == 0) {
      const std::string suffix = name.substr(7);
      const bool numeric = !suffix.empty() && suffix.size() < 10 &&
                           std::all_of(suffix.begin(), suffix.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
      if (!numeric || std::stoul(suffix) >= rest_count) {
        throw FormatError(where + ": SH property \"" + name + "\" is not contiguous");
      }
    }
  }
  int degree = -1;
  for (int l = 0; l <= kMaxShDegree; ++l) {
    if (rest_count == static_cast<std::size_t>(3 * (sh_coeff_count(l) - 1))) degree = l;
  }
  if (degree < 0) {
    throw FormatError(where + ": " + std::to_string(rest_count) +
                      " f_rest properties do not match any SH degree 0..3");
  }
  std::vector<const Property*> rest_props;
  for (std::size_t i = 0; i < rest_count; ++i) {
    rest_props.push_back(require("f_rest_" + std::to_string(i)));
  }

  std::vector<unsigned char> data(vertex->count * vertex->stride);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size()) {
    throw FormatError(where + ": truncated vertex data (expected " +
                      std::to_string(vertex->count) + " vertices)");
  }

  const int coeffs = sh_coeff_count(degree);
  std::vector<Gaussian> gaussians(vertex->count);
  for (std::size_t i = 0; i < vertex->count; ++i) {
    const unsigned char* row = data.data() + i * vertex->stride;
    auto value = [&](const Property* p) {
      const double v = decode(p->type, row + p->offset);
      if (!std::isfinite(v)) {
        throw FormatError(where + ": non-finite value in property \"" + p->name +
                          "\" of vertex " + std::to_string(i));
      }
      return v;
    };
    Gaussian& g = gaussians[i];
    g.mu = {value(fixed_props[0]), value(fixed_props[1]), value(fixed_props[2])};
    for (int c = 0; c < 3; ++c) g.sh[c * kMaxShCoeffs] = value(fixed_props[3 + c]);
    g.opacity_logit = value(fixed_props[6]);
    g.log_scale = {value(fixed_props[7]), value(fixed_props[8]), value(fixed_props[9])};
    Eigen::Quaterniond q(value(fixed_props[10]), value(fixed_props[11]), value(fixed_props[12]),
                         value(fixed_props[13]));
    const double n = q.norm();
    if (n < 1e-12) {
      throw FormatError(where + ": zero-length quaternion (rot_0..rot_3) at vertex " +
                        std::to_string(i));
    }
    if (std::abs(n - 1.0) > 1e-12) q.coeffs() /= n;
    g.rot = q;
    for (int c = 0; c < 3; ++c) {
      for (int k = 1; k < coeffs; ++k) {
        g.sh[c * kMaxShCoeffs + k] = value(rest_props[c * (coeffs - 1) + (k - 1)]);
      }
    }
  }
  return GaussianCloud(degree, std::move(gaussians), header.frame_label);
}

void save_ply(const GaussianCloud& cloud, const std::filesystem::path& path,
              PlyPrecision precision) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("ply " + path.string() + ": cannot open for writing");

  const bool f64 = precision == PlyPrecision::kFloat64;
  const char* type = f64 ? "double" : "float";
  const int coeffs = sh_coeff_count(cloud.sh_degree());

  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n";
  if (!cloud.frame_label().empty()) header << "comment gsreg_frame " << cloud.frame_label() << '\n';
  header << "element vertex " << cloud.size() << '\n';
  for (const char* n : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    header << "property " << type << ' ' << n << '\n';
  }
  for (int i = 0; i < 3 * (coeffs - 1); ++i) header << "property " << type << " f_rest_" << i << '\n';
  for (const char* n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
                        "rot_3"}) {
    header << "property " << type << ' ' << n << '\n';
  }
  header << "end_header\n";
  out << header.str();

  std::vector<unsigned char> row;
  auto put = [&](double v) {
    if (f64) {
      unsigned char b[8];
      std::memcpy(b, &v, 8);
      row.insert(row.end(), b, b + 8);
    } else {
      const float f = static_cast<float>(v);
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      row.insert(row.end(), b, b + 4);
    }
  };
  for (const Gaussian& g : cloud.gaussians()) {
    row.clear();
    put(g.mu.x());
    put(g.mu.y());
    put(g.mu.z());
    for (int c = 0; c < 3; ++c) put(g.sh[c * kMaxShCoeffs]);
    for (int c = 0; c < 3; ++c) {
      for (int k = 1; k < coeffs; ++k) put(g.sh[c * kMaxShCoeffs + k]);
    }
    put(g.opacity_logit);
    for (int a = 0; a < 3; ++a) put(g.log_scale[a]);
    put(g.rot.w());
    put(g.rot.x());
    put(g.rot.y());
    put(g.rot.z());
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw FormatError("ply " + path.string() + ": write failed");
}

}  // namespace gsreg
