#include "psim/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace psim {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
    out << "\r\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
}

CsvTable diagnostics_table(const std::vector<DiagnosticsRecord>& records, double time_scale) {
  CsvTable t;
  t.header = {"time"};
  if (time_scale > 0.0) t.header.push_back("time_s");
  for (const char* c : {"entropy_E_T", "dissipation_D_T", "entropy_vs_steady_E_inf"}) t.header.push_back(c);
  for (Field f : kAllFields) t.header.push_back("l2_" + field_name(f));
  t.header.push_back("anion_mass");
  const bool dim = !records.empty() && records.front().free_energy_dimensional.has_value();
  if (dim) t.header.push_back("free_energy_dimensional");
  for (const auto& r : records) {
    std::vector<std::string> row{format_double(r.time)};
    if (time_scale > 0.0) row.push_back(format_double(r.time * time_scale));
    row.push_back(format_double(r.entropy_E_T));
    row.push_back(format_double(r.dissipation_D_T));
    row.push_back(format_double(r.entropy_vs_steady_E_inf));
    for (double e : r.l2_errors) row.push_back(format_double(e));
    row.push_back(format_double(r.anion_mass));
    if (dim) row.push_back(format_double(r.free_energy_dimensional.value_or(std::nan(""))));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable profile_table(const Scenario& sc, const State& st, double length_scale) {
  const Mesh& m = sc.mesh;
  const Densities d = compute_densities(sc, st);
  CsvTable t;
  t.header = {"x"};
  if (length_scale > 0.0) t.header.push_back("x_cm");
  for (const char* c : {"region", "psi", "phi_n", "phi_p", "phi_a", "n_n", "n_p", "n_a"}) t.header.push_back(c);
  static const char* names[] = {"htl", "intrinsic", "etl"};
  for (int k = 0; k < m.num_cells(); ++k) {
    const double x = m.cells[k].center;
    std::vector<std::string> row{format_double(x)};
    if (length_scale > 0.0) row.push_back(format_double(x * length_scale));
    row.push_back(names[static_cast<int>(m.cells[k].region)]);
    row.push_back(format_double(st.psi[k]));
    row.push_back(format_double(st.phi_n[k]));
    row.push_back(format_double(st.phi_p[k]));
    const int ia = m.intrinsic_index[k];
    row.push_back(ia >= 0 ? format_double(st.phi_a[ia]) : "");
    row.push_back(format_double(d.n[k]));
    row.push_back(format_double(d.p[k]));
    row.push_back(ia >= 0 ? format_double(d.a[ia]) : "");
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string svg_log_plot(const std::string& title, const std::string& xlabel, const std::vector<Series>& series) {
  const double W = 720, H = 440, L = 80, R = 170, T = 40, B = 50;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.y[i] > 0.0) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      const double ly = std::log10(s.y[i]);
      ymin = std::min(ymin, ly);
      ymax = std::max(ymax, ly);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double ly) { return T + (ymax - ly) / (ymax - ymin) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  const int span = static_cast<int>(ymax - ymin);
  const int every = std::max(1, span / 8);
  for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); e += every) {
    o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(e) << "\" y2=\"" << py(e)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\" font-size=\"11\">1e" << e
      << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double x = xmin + i * (xmax - xmin) / 4;
    o << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << x
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << xlabel << "</text>\n";
  for (size_t s = 0; s < series.size(); ++s) {
    const char* c = colors[s % 7];
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < series[s].x.size(); ++i) {
      const double y = series[s].y[i];
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      o << px(series[s].x[i]) << "," << py(std::log10(y)) << " ";
    }
    o << "\"/>\n";
    const double ly = T + 16 + 18 * s;
    o << "<line x1=\"" << W - R + 12 << "\" x2=\"" << W - R + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << series[s].label
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string manifest_json(const ManifestInfo& info) {
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a_hash(info.config_text)));
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["artifact_version"] = kArtifactVersion;
  j["command"] = info.command;
  j["config"] = info.config_path;
  j["config_hash_fnv1a"] = hash;
  j["status"] = info.status;
  j["files"] = info.files;
  return j.dump(2) + "\n";
}

}  // namespace psim
