#include "frk/app/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "frk/error.hpp"

namespace frk::app {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

// Geometry of one row from whichever shape columns are filled.
Support row_geometry(const Table& t, std::size_t r) {
  const int cx = t.col("x"), cy = t.col("y");
  const int c0 = t.col("xmin"), c1 = t.col("ymin"), c2 = t.col("xmax"), c3 = t.col("ymax");
  const int cb = t.col("baus"), ct = t.col("t");
  Support s;
  const auto x = cx >= 0 ? t.number(r, cx) : std::nullopt;
  const auto y = cy >= 0 ? t.number(r, cy) : std::nullopt;
  const auto x0 = c0 >= 0 ? t.number(r, c0) : std::nullopt;
  int kinds = 0;
  if (x || y) {
    s.shape = Point{t.required(r, cx, "x"), t.required(r, cy, "y")};
    ++kinds;
  }
  if (x0 || (c1 >= 0 && t.number(r, c1)) || (c2 >= 0 && t.number(r, c2)) || (c3 >= 0 && t.number(r, c3))) {
    s.shape = Rect{t.required(r, c0, "xmin"), t.required(r, c1, "ymin"), t.required(r, c2, "xmax"),
                   t.required(r, c3, "ymax")};
    ++kinds;
  }
  if (cb >= 0 && !t.rows[r][static_cast<std::size_t>(cb)].empty()) {
    BauList list;
    std::stringstream ss(t.rows[r][static_cast<std::size_t>(cb)]);
    std::string id;
    while (std::getline(ss, id, ';')) {
      int v = 0;
      const auto res = std::from_chars(id.data(), id.data() + id.size(), v);
      if (res.ec != std::errc() || res.ptr != id.data() + id.size()) {
        throw io_error(t.where(r) + ": baus must be ';'-separated BAU indices");
      }
      list.ids.push_back(v);
    }
    s.shape = list;
    ++kinds;
  }
  if (kinds != 1) throw io_error(t.where(r) + ": give exactly one of x,y or xmin,ymin,xmax,ymax or baus");
  if (ct >= 0) {
    if (const auto tv = t.number(r, ct)) {
      if (*tv != std::floor(*tv) || *tv < 0) throw io_error(t.where(r) + ": t must be a non-negative integer bin");
      s.time = static_cast<int>(*tv);
    }
  }
  return s;
}

void geometry_cells(std::ostringstream& os, const Support& s) {
  if (const auto* p = std::get_if<Point>(&s.shape)) {
    os << fmt(p->x) << ',' << fmt(p->y) << ",,,,,";
  } else if (const auto* r = std::get_if<Rect>(&s.shape)) {
    os << ",," << fmt(r->xmin) << ',' << fmt(r->ymin) << ',' << fmt(r->xmax) << ',' << fmt(r->ymax) << ',';
  } else {
    const auto& ids = std::get<BauList>(s.shape).ids;
    os << ",,,,,,";
    for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? ";" : "") << ids[i];
  }
  os << ',';
  if (s.time) os << *s.time;
}

}  // namespace

int Table::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::string Table::where(std::size_t row) const {
  return source.string() + " line " + std::to_string(lines[row]);
}

std::optional<double> Table::number(std::size_t row, int c) const {
  if (c < 0) return std::nullopt;
  const std::string& s = rows[row][static_cast<std::size_t>(c)];
  if (s.empty() || s == "NA") return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw io_error(where(row) + ": column '" + header[static_cast<std::size_t>(c)] + "' is not a number: '" + s + "'");
  }
  return v;
}

double Table::required(std::size_t row, int c, const std::string& what) const {
  if (c < 0) throw io_error(source.string() + ": missing column '" + what + "'");
  const auto v = number(row, c);
  if (!v) throw io_error(where(row) + ": column '" + what + "' is empty");
  return *v;
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  Table t;
  t.source = path;
  std::string line;
  if (!std::getline(in, line)) throw io_error(path.string() + ": missing header row");
  for (auto& h : split(trim(line))) t.header.push_back(trim(h));
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split(line);
    for (auto& c : cells) c = trim(c);
    if (cells.size() != t.header.size()) {
      throw io_error(path.string() + " line " + std::to_string(lineno) + ": expected " +
                     std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  return t;
}

void check_columns(const Table& t, const std::vector<std::string>& allowed) {
  for (const auto& h : t.header) {
    if (std::find(allowed.begin(), allowed.end(), h) == allowed.end()) {
      throw io_error(t.source.string() + ": unknown column '" + h + "'");
    }
  }
}

void write_atomic_binary(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_atomic(const std::filesystem::path& path, const std::string& content) { write_atomic_binary(path, content); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<DataRow> read_data(const std::filesystem::path& path) {
  const Table t = read_csv(path);
  check_columns(t, {"id", "x", "y", "xmin", "ymin", "xmax", "ymax", "baus", "t", "z", "k"});
  const int cz = t.col("z"), ck = t.col("k");
  if (cz < 0) throw io_error(path.string() + ": missing column 'z'");
  std::vector<DataRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    DataRow d;
    d.geom = row_geometry(t, r);
    d.z = t.required(r, cz, "z");
    d.k = t.number(r, ck);
    out.push_back(std::move(d));
  }
  if (out.empty()) throw io_error(path.string() + ": no data rows");
  return out;
}

std::string format_data(const std::vector<DataRow>& rows) {
  std::ostringstream os;
  os << "id,x,y,xmin,ymin,xmax,ymax,baus,t,z,k\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << i << ',';
    geometry_cells(os, rows[i].geom);
    os << ',' << fmt(rows[i].z) << ',';
    if (rows[i].k) os << fmt(*rows[i].k);
    os << '\n';
  }
  return os.str();
}

std::vector<Region> read_regions(const std::filesystem::path& path) {
  const Table t = read_csv(path);
  check_columns(t, {"id", "x", "y", "xmin", "ymin", "xmax", "ymax", "baus", "t"});
  const int ci = t.col("id");
  std::vector<Region> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Region g;
    g.id = ci >= 0 ? static_cast<int>(t.required(r, ci, "id")) : static_cast<int>(r);
    g.geom = row_geometry(t, r);
    out.push_back(std::move(g));
  }
  if (out.empty()) throw io_error(path.string() + ": no regions");
  return out;
}

std::vector<TruthRow> read_truth(const std::filesystem::path& path) {
  const Table t = read_csv(path);
  check_columns(t, {"id", "cx", "cy", "t", "latent", "mu", "pi", "k", "observed"});
  std::vector<TruthRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TruthRow x;
    x.id = static_cast<int>(t.required(r, t.col("id"), "id"));
    x.centre = {t.required(r, t.col("cx"), "cx"), t.required(r, t.col("cy"), "cy")};
    x.t = t.col("t") >= 0 ? static_cast<int>(t.number(r, t.col("t")).value_or(0.0)) : 0;
    x.latent = t.required(r, t.col("latent"), "latent");
    x.mu = t.required(r, t.col("mu"), "mu");
    x.pi = t.number(r, t.col("pi"));
    x.k = t.number(r, t.col("k"));
    x.observed = t.required(r, t.col("observed"), "observed") != 0.0;
    out.push_back(x);
  }
  return out;
}

std::string format_truth(const std::vector<TruthRow>& rows) {
  std::ostringstream os;
  os << "id,cx,cy,t,latent,mu,pi,k,observed\n";
  for (const auto& r : rows) {
    os << r.id << ',' << fmt(r.centre.x) << ',' << fmt(r.centre.y) << ',' << r.t << ',' << fmt(r.latent) << ','
       << fmt(r.mu) << ',' << (r.pi ? fmt(*r.pi) : "") << ',' << (r.k ? fmt(*r.k) : "") << ',' << (r.observed ? 1 : 0)
       << '\n';
  }
  return os.str();
}

}  // namespace frk::app
