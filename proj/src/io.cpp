#include "ordst/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iterator>
#include <map>
#include <json.hpp>
#include <sstream>

#include "ordst/error.hpp"

namespace ordst::io {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) s.push_back(',');
    s += fields[k];
  }
  return s;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("E_IO", "cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error("E_IO", "cannot open " + path.string());
  return in;
}

// Little-endian binary helpers.
class BinWriter {
 public:
  explicit BinWriter(const fs::path& path) : out_(open_out(path, std::ios::binary)), path_(path) {}
  void magic(const char (&m)[5]) { out_.write(m, 4); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    out_.write(reinterpret_cast<const char*>(b), 4);
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }
  void finish() {
    out_.flush();
    if (!out_) throw Error("E_IO", "write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

class BinReader {
 public:
  explicit BinReader(const fs::path& path) : path_(path) {
    auto in = open_in(path, std::ios::binary);
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  void magic(const char (&m)[5]) {
    need(4);
    if (std::memcmp(buf_.data() + pos_, m, 4) != 0)
      throw Error("E_FORMAT", path_.string() + ": bad magic, expected " + std::string(m));
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + k])) << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  void expect_end() const {
    if (pos_ != buf_.size()) throw Error("E_FORMAT", path_.string() + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw Error("E_FORMAT", path_.string() + ": truncated file");
  }
  fs::path path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error("E_PARSE", context + ": not a number: '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s, const std::string& context) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw Error("E_PARSE", context + ": not an integer: '" + s + "'");
  return v;
}

std::string RunMetadata::comment_line() const {
  return "# config_hash=" + hex64(config_hash) + " seed=" + std::to_string(seed);
}

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error("E_SCHEMA", "missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  auto in = open_in(path);
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw Error("E_SCHEMA", path.string() + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (!have_header) throw Error("E_SCHEMA", path.string() + ": no header row");
  return t;
}

CsvWriter::CsvWriter(const fs::path& path, const RunMetadata* meta, const std::vector<std::string>& header)
    : out_(open_out(path)), path_(path) {
  if (meta) out_ << meta->comment_line() << '\n';
  out_ << join(header) << '\n';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  out_ << join(fields) << '\n';
  if (!out_) throw Error("E_IO", "write failed for " + path_.string());
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

std::vector<SitePanel> IngestResult::training() const {
  std::vector<SitePanel> out;
  out.reserve(panels.size());
  const auto k = static_cast<Eigen::Index>(t_train);
  for (const auto& p : panels) {
    SitePanel q;
    q.site_id = p.site_id;
    q.y.assign(p.y.begin(), p.y.begin() + static_cast<std::ptrdiff_t>(t_train));
    q.x = p.x.topRows(k);
    out.push_back(std::move(q));
  }
  return out;
}

Eigen::MatrixXi IngestResult::holdout_levels(std::size_t horizon) const {
  if (t_train + horizon > weeks)
    throw Error("E_HORIZON", "holdout needs weeks " + std::to_string(t_train + 1) + ".." +
                                 std::to_string(t_train + horizon) + " but data has " + std::to_string(weeks));
  Eigen::MatrixXi h(static_cast<Eigen::Index>(panels.size()), static_cast<Eigen::Index>(horizon));
  for (std::size_t i = 0; i < panels.size(); ++i)
    for (std::size_t s = 0; s < horizon; ++s)
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = panels[i].y[t_train + s];
  return h;
}

Eigen::MatrixXd IngestResult::holdout_covariate(std::size_t k, std::size_t horizon) const {
  if (t_train + horizon > weeks) throw Error("E_HORIZON", "holdout exceeds available weeks");
  Eigen::MatrixXd h(static_cast<Eigen::Index>(panels.size()), static_cast<Eigen::Index>(horizon));
  for (std::size_t i = 0; i < panels.size(); ++i)
    h.row(static_cast<Eigen::Index>(i)) =
        panels[i].x.col(static_cast<Eigen::Index>(k)).segment(static_cast<Eigen::Index>(t_train),
                                                             static_cast<Eigen::Index>(horizon)).transpose();
  return h;
}

IngestResult ingest(const fs::path& data_csv, const fs::path& sites_csv, const Cutoffs& cutoffs,
                    std::size_t t_train) {
  IngestResult out;

  const auto sites = read_csv(sites_csv);
  const std::size_t c_site = sites.column("site_id"), c_row = sites.column("row"), c_col = sites.column("col");
  for (std::size_t r = 0; r < sites.rows.size(); ++r) {
    const std::string ctx = sites_csv.string() + ":" + std::to_string(sites.line_numbers[r]);
    out.grid.push_back({static_cast<int>(parse_int(sites.rows[r][c_site], ctx)),
                        static_cast<int>(parse_int(sites.rows[r][c_row], ctx)),
                        static_cast<int>(parse_int(sites.rows[r][c_col], ctx))});
  }
  std::sort(out.grid.begin(), out.grid.end(), [](const GridCell& a, const GridCell& b) { return a.site_id < b.site_id; });
  for (std::size_t i = 0; i < out.grid.size(); ++i)
    if (out.grid[i].site_id != static_cast<int>(i + 1))
      throw Error("E_GRID", "site ids must be contiguous 1..I; found " + std::to_string(out.grid[i].site_id) +
                                " at position " + std::to_string(i + 1));
  const std::size_t n = out.grid.size();

  const auto data = read_csv(data_csv);
  if (data.header.size() < 3 || data.header[0] != "site_id" || data.header[1] != "week" || data.header[2] != "y")
    throw Error("E_SCHEMA", data_csv.string() + ": header must start with site_id,week,y");
  const std::size_t p = data.header.size() - 3;
  for (std::size_t j = 0; j < p; ++j)
    if (data.header[3 + j] != "x" + std::to_string(j + 1))
      throw Error("E_SCHEMA", data_csv.string() + ": covariate column " + std::to_string(j + 1) + " must be named x" +
                                  std::to_string(j + 1));

  // (site, week) -> row, rejecting duplicates.
  std::vector<std::map<long long, std::size_t>> by_site(n);
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    const std::string ctx = data_csv.string() + ":" + std::to_string(data.line_numbers[r]);
    const long long site = parse_int(data.rows[r][0], ctx);
    const long long week = parse_int(data.rows[r][1], ctx);
    if (site < 1 || static_cast<std::size_t>(site) > n)
      throw Error("E_UNKNOWN_SITE", ctx + ": site " + std::to_string(site) + " is not in the sites file");
    if (!by_site[static_cast<std::size_t>(site - 1)].emplace(week, r).second)
      throw Error("E_DUPLICATE_CELL", ctx + ": duplicate row for site " + std::to_string(site) + ", week " +
                                          std::to_string(week));
  }
  std::size_t weeks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = by_site[i];
    if (m.empty()) throw Error("E_MISSING_CELL", "site " + std::to_string(i + 1) + " has no data rows");
    if (m.begin()->first != 1 || m.rbegin()->first != static_cast<long long>(m.size()))
      throw Error("E_NONCONTIGUOUS_WEEKS", "site " + std::to_string(i + 1) + ": weeks must be contiguous 1..T");
    if (i == 0) weeks = m.size();
    if (m.size() != weeks)
      throw Error("E_MISSING_CELL", "site " + std::to_string(i + 1) + " has " + std::to_string(m.size()) +
                                        " weeks, site 1 has " + std::to_string(weeks));
  }
  out.weeks = weeks;
  out.t_train = t_train == 0 ? weeks : t_train;
  if (out.t_train > weeks)
    throw Error("E_CONFIG", "t_train " + std::to_string(out.t_train) + " exceeds " + std::to_string(weeks) + " weeks");

  const auto t_len = static_cast<Eigen::Index>(weeks);
  const auto k = static_cast<Eigen::Index>(p);
  for (std::size_t i = 0; i < n; ++i) {
    SitePanel panel;
    panel.site_id = static_cast<int>(i + 1);
    panel.y.resize(weeks);
    panel.x.resize(t_len, k + 1);
    panel.x.col(0).setOnes();
    for (const auto& [week, r] : by_site[i]) {
      const std::string ctx = data_csv.string() + ":" + std::to_string(data.line_numbers[r]);
      const auto t = static_cast<std::size_t>(week - 1);
      const long long y = parse_int(data.rows[r][2], ctx);
      if (y < 0 || y > cutoffs.interior())
        throw Error("E_LEVEL", ctx + ": level " + std::to_string(y) + " outside 0.." + std::to_string(cutoffs.interior()));
      panel.y[t] = static_cast<int>(y);
      for (Eigen::Index j = 0; j < k; ++j) {
        const double v = parse_double(data.rows[r][3 + static_cast<std::size_t>(j)], ctx);
        if (!std::isfinite(v)) throw Error("E_PARSE", ctx + ": non-finite covariate");
        panel.x(static_cast<Eigen::Index>(t), j + 1) = v;
      }
    }
    out.panels.push_back(std::move(panel));
  }

  // Pooled standardisation over training weeks, population sd.
  out.standardization.mean = Eigen::VectorXd::Zero(k);
  out.standardization.sd = Eigen::VectorXd::Ones(k);
  const auto tt = static_cast<Eigen::Index>(out.t_train);
  const double count = static_cast<double>(n * out.t_train);
  for (Eigen::Index j = 0; j < k; ++j) {
    double s = 0.0;
    for (const auto& pn : out.panels) s += pn.x.col(j + 1).head(tt).sum();
    const double m = s / count;
    double ss = 0.0;
    for (const auto& pn : out.panels) ss += (pn.x.col(j + 1).head(tt).array() - m).square().sum();
    const double sd = std::sqrt(ss / count);
    if (!(sd > 0.0)) throw Error("E_ZERO_VARIANCE", "covariate x" + std::to_string(j + 1) + " has zero variance over training weeks");
    out.standardization.mean(j) = m;
    out.standardization.sd(j) = sd;
    for (auto& pn : out.panels) pn.x.col(j + 1) = (pn.x.col(j + 1).array() - m) / sd;
  }
  return out;
}

void write_data_csv(const fs::path& path, std::span<const SitePanel> panels, const RunMetadata* meta) {
  std::vector<std::string> header{"site_id", "week", "y"};
  const Eigen::Index k = panels.empty() ? 0 : panels[0].x.cols() - 1;
  for (Eigen::Index j = 1; j <= k; ++j) header.push_back("x" + std::to_string(j));
  CsvWriter w(path, meta, header);
  for (const auto& p : panels) {
    for (std::size_t t = 0; t < p.length(); ++t) {
      std::vector<std::string> f{std::to_string(p.site_id), std::to_string(t + 1), std::to_string(p.y[t])};
      for (Eigen::Index j = 1; j <= k; ++j) f.push_back(format_double(p.x(static_cast<Eigen::Index>(t), j)));
      w.row(f);
    }
  }
}

void write_sites_csv(const fs::path& path, std::span<const GridCell> grid, const RunMetadata* meta) {
  CsvWriter w(path, meta, {"site_id", "row", "col"});
  for (const auto& c : grid) w.row({std::to_string(c.site_id), std::to_string(c.row), std::to_string(c.col)});
}

// ---------------------------------------------------------------------------
// Binary draw files
// ---------------------------------------------------------------------------

void write_reservoir(const fs::path& path, const Reservoir& reservoir) {
  if (reservoir.draws.empty()) throw Error("E_EMPTY_RESERVOIR", "cannot write an empty reservoir");
  const auto& first = reservoir.draws.front();
  const auto t_len = static_cast<std::uint32_t>(first.z.size());
  const auto p = static_cast<std::uint32_t>(first.beta.size() - 1);
  BinWriter w(path);
  w.magic("TSR1");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(reservoir.site_id));
  w.u32(t_len);
  w.u32(p);
  w.u32(static_cast<std::uint32_t>(reservoir.draws.size()));
  for (const auto& d : reservoir.draws) {
    if (d.z.size() != static_cast<Eigen::Index>(t_len) || d.beta.size() != static_cast<Eigen::Index>(p + 1))
      throw Error("E_SHAPE", "reservoir records have inconsistent shapes");
    for (Eigen::Index k = 0; k < d.beta.size(); ++k) w.f64(d.beta(k));
    w.f64(d.gamma);
    w.f64(d.sigma2);
    for (Eigen::Index t = 0; t < d.z.size(); ++t) w.f64(d.z(t));
  }
  w.finish();
}

Reservoir read_reservoir(const fs::path& path) {
  BinReader r(path);
  r.magic("TSR1");
  if (const auto v = r.u32(); v != kFormatVersion)
    throw Error("E_FORMAT", path.string() + ": unsupported version " + std::to_string(v));
  Reservoir res;
  res.site_id = static_cast<int>(r.u32());
  const auto t_len = static_cast<Eigen::Index>(r.u32());
  const auto p = static_cast<Eigen::Index>(r.u32());
  const std::uint32_t n = r.u32();
  res.draws.resize(n);
  for (auto& d : res.draws) {
    d.beta.resize(p + 1);
    for (Eigen::Index k = 0; k <= p; ++k) d.beta(k) = r.f64();
    d.gamma = r.f64();
    d.sigma2 = r.f64();
    d.z.resize(t_len);
    for (Eigen::Index t = 0; t < t_len; ++t) d.z(t) = r.f64();
  }
  r.expect_end();
  return res;
}

void write_reservoir_csv(const fs::path& path, const Reservoir& reservoir, const RunMetadata* meta) {
  if (reservoir.draws.empty()) throw Error("E_EMPTY_RESERVOIR", "cannot write an empty reservoir");
  const auto& first = reservoir.draws.front();
  std::vector<std::string> header{"draw"};
  for (Eigen::Index k = 0; k < first.beta.size(); ++k) header.push_back("beta" + std::to_string(k));
  header.push_back("gamma");
  header.push_back("sigma2");
  for (Eigen::Index t = 0; t < first.z.size(); ++t) header.push_back("z" + std::to_string(t + 1));
  CsvWriter w(path, meta, header);
  for (std::size_t m = 0; m < reservoir.draws.size(); ++m) {
    const auto& d = reservoir.draws[m];
    std::vector<std::string> f{std::to_string(m + 1)};
    for (Eigen::Index k = 0; k < d.beta.size(); ++k) f.push_back(format_double(d.beta(k)));
    f.push_back(format_double(d.gamma));
    f.push_back(format_double(d.sigma2));
    for (Eigen::Index t = 0; t < d.z.size(); ++t) f.push_back(format_double(d.z(t)));
    w.row(f);
  }
}

void write_var_reservoir(const fs::path& path, const VarReservoir& reservoir) {
  if (reservoir.draws.empty()) throw Error("E_EMPTY_RESERVOIR", "cannot write an empty VAR reservoir");
  const auto j = reservoir.draws.front().delta.size();
  BinWriter w(path);
  w.magic("TVR1");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(reservoir.site_id));
  w.u32(static_cast<std::uint32_t>(j));
  w.u32(static_cast<std::uint32_t>(reservoir.draws.size()));
  for (const auto& d : reservoir.draws) {
    if (d.delta.size() != j || d.sigma.rows() != j || d.sigma.cols() != j)
      throw Error("E_SHAPE", "VAR reservoir records have inconsistent shapes");
    for (Eigen::Index a = 0; a < j; ++a) w.f64(d.delta(a));
    for (Eigen::Index a = 0; a < j; ++a)
      for (Eigen::Index b = 0; b <= a; ++b) w.f64(d.sigma(a, b));
  }
  w.finish();
}

VarReservoir read_var_reservoir(const fs::path& path) {
  BinReader r(path);
  r.magic("TVR1");
  if (const auto v = r.u32(); v != kFormatVersion)
    throw Error("E_FORMAT", path.string() + ": unsupported version " + std::to_string(v));
  VarReservoir res;
  res.site_id = static_cast<int>(r.u32());
  const auto j = static_cast<Eigen::Index>(r.u32());
  const std::uint32_t n = r.u32();
  res.draws.resize(n);
  for (auto& d : res.draws) {
    d.delta.resize(j);
    d.sigma.resize(j, j);
    for (Eigen::Index a = 0; a < j; ++a) d.delta(a) = r.f64();
    for (Eigen::Index a = 0; a < j; ++a)
      for (Eigen::Index b = 0; b <= a; ++b) d.sigma(a, b) = d.sigma(b, a) = r.f64();
    if ((d.delta.array().abs() >= 1.0).any()) ++res.explosive_draws;
  }
  r.expect_end();
  return res;
}

std::string site_file_name(int site_id, const std::string& extension) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "site_%05d.", site_id);
  return buf + extension;
}

void write_posterior_store(const fs::path& dir, const PosteriorStore& store, const RunMetadata* meta) {
  if (store.n_draws() == 0) throw Error("E_EMPTY_STORE", "posterior store has no draws");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < store.n_sites(); ++i) {
    Reservoir r;
    r.site_id = store.site_ids[i];
    r.draws = store.draws[i];
    write_reservoir(dir / site_file_name(r.site_id, "tsr"), r);
  }
  const Eigen::Index k = store.hyper.front().sigma2_beta.size();
  std::vector<std::string> header{"iteration", "sigma2_gamma"};
  for (Eigen::Index p = 0; p < k; ++p) header.push_back("sigma2_p" + std::to_string(p));
  CsvWriter w(dir / "hyper.csv", meta, header);
  for (std::size_t m = 0; m < store.n_draws(); ++m) {
    std::vector<std::string> f{std::to_string(store.iterations.empty() ? m + 1 : store.iterations[m]),
                               format_double(store.hyper[m].sigma2_gamma)};
    for (Eigen::Index p = 0; p < k; ++p) f.push_back(format_double(store.hyper[m].sigma2_beta(p)));
    w.row(f);
  }
}

PosteriorStore read_posterior_store(const fs::path& dir) {
  PosteriorStore store;
  const auto hyper = read_csv(dir / "hyper.csv");
  const std::size_t k = hyper.header.size() - 2;
  for (std::size_t r = 0; r < hyper.rows.size(); ++r) {
    const std::string ctx = (dir / "hyper.csv").string() + ":" + std::to_string(hyper.line_numbers[r]);
    store.iterations.push_back(static_cast<std::size_t>(parse_int(hyper.rows[r][0], ctx)));
    HyperParams h;
    h.sigma2_gamma = parse_double(hyper.rows[r][1], ctx);
    h.sigma2_beta.resize(static_cast<Eigen::Index>(k));
    for (std::size_t p = 0; p < k; ++p) h.sigma2_beta(static_cast<Eigen::Index>(p)) = parse_double(hyper.rows[r][2 + p], ctx);
    store.hyper.push_back(std::move(h));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".tsr") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto r = read_reservoir(f);
    if (r.draws.size() != store.hyper.size())
      throw Error("E_DRAW_MISMATCH", f.string() + " holds " + std::to_string(r.draws.size()) + " draws, hyper.csv " +
                                         std::to_string(store.hyper.size()));
    store.site_ids.push_back(r.site_id);
    store.draws.push_back(std::move(r.draws));
  }
  if (store.draws.empty()) throw Error("E_EMPTY_STORE", dir.string() + " contains no site files");
  return store;
}

void write_acceptance_csv(const fs::path& path, const AcceptanceStats& stats, const RunMetadata* meta) {
  CsvWriter w(path, meta, {"site_id", "proposed", "accepted"});
  for (std::size_t i = 0; i < stats.proposed.size(); ++i)
    w.row({std::to_string(i + 1), std::to_string(stats.proposed[i]), std::to_string(stats.accepted[i])});
}

void write_var_store(const fs::path& dir, const VarPosteriorStore& store, const RunMetadata* meta) {
  if (store.n_draws() == 0) throw Error("E_EMPTY_STORE", "VAR store has no draws");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < store.n_sites(); ++i) {
    VarReservoir r;
    r.site_id = store.site_ids[i];
    r.draws = store.draws[i];
    write_var_reservoir(dir / site_file_name(r.site_id, "tvr"), r);
  }
  const Eigen::Index j = store.hyper.front().size();
  std::vector<std::string> header{"iteration"};
  for (Eigen::Index a = 0; a < j; ++a) header.push_back("sigma2_delta" + std::to_string(a + 1));
  CsvWriter w(dir / "var_hyper.csv", meta, header);
  for (std::size_t m = 0; m < store.n_draws(); ++m) {
    std::vector<std::string> f{std::to_string(store.iterations.empty() ? m + 1 : store.iterations[m])};
    for (Eigen::Index a = 0; a < j; ++a) f.push_back(format_double(store.hyper[m](a)));
    w.row(f);
  }
}

VarPosteriorStore read_var_store(const fs::path& dir) {
  VarPosteriorStore store;
  const auto hyper = read_csv(dir / "var_hyper.csv");
  const std::size_t j = hyper.header.size() - 1;
  for (std::size_t r = 0; r < hyper.rows.size(); ++r) {
    const std::string ctx = (dir / "var_hyper.csv").string() + ":" + std::to_string(hyper.line_numbers[r]);
    store.iterations.push_back(static_cast<std::size_t>(parse_int(hyper.rows[r][0], ctx)));
    Eigen::VectorXd h(static_cast<Eigen::Index>(j));
    for (std::size_t a = 0; a < j; ++a) h(static_cast<Eigen::Index>(a)) = parse_double(hyper.rows[r][1 + a], ctx);
    store.hyper.push_back(std::move(h));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".tvr") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto r = read_var_reservoir(f);
    if (r.draws.size() != store.hyper.size())
      throw Error("E_DRAW_MISMATCH", f.string() + " draw count differs from var_hyper.csv");
    store.site_ids.push_back(r.site_id);
    store.draws.push_back(std::move(r.draws));
  }
  if (store.draws.empty()) throw Error("E_EMPTY_STORE", dir.string() + " contains no VAR site files");
  return store;
}

void write_fourier_csv(const fs::path& path, std::span<const FourierFit> fits, const RunMetadata* meta) {
  std::vector<std::string> header{"site_id", "covariate"};
  for (int k = 0; k < kFourierTerms; ++k) header.push_back("zeta_" + std::to_string(k));
  CsvWriter w(path, meta, header);
  for (const auto& fit : fits)
    for (Eigen::Index j = 0; j < fit.coef.cols(); ++j) {
      std::vector<std::string> f{std::to_string(fit.site_id), std::to_string(j + 1)};
      for (int k = 0; k < kFourierTerms; ++k) f.push_back(format_double(fit.coef(k, j)));
      w.row(f);
    }
}

std::vector<FourierFit> read_fourier_csv(const fs::path& path) {
  const auto t = read_csv(path);
  std::map<int, std::map<int, Eigen::VectorXd>> cols;
  const std::size_t c_site = t.column("site_id"), c_cov = t.column("covariate");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string ctx = path.string() + ":" + std::to_string(t.line_numbers[r]);
    Eigen::VectorXd z(kFourierTerms);
    for (int k = 0; k < kFourierTerms; ++k) z(k) = parse_double(t.rows[r][t.column("zeta_" + std::to_string(k))], ctx);
    cols[static_cast<int>(parse_int(t.rows[r][c_site], ctx))][static_cast<int>(parse_int(t.rows[r][c_cov], ctx))] = z;
  }
  std::vector<FourierFit> out;
  for (const auto& [site, m] : cols) {
    FourierFit f;
    f.site_id = site;
    f.coef.resize(kFourierTerms, static_cast<Eigen::Index>(m.size()));
    int expect = 1;
    for (const auto& [j, z] : m) {
      if (j != expect++) throw Error("E_SCHEMA", path.string() + ": covariates of site " + std::to_string(site) + " not contiguous");
      f.coef.col(j - 1) = z;
    }
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd json_mat(const json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0);
  for (Eigen::Index r = 0; r < n; ++r) m.row(r) = json_vec(j[static_cast<std::size_t>(r)]).transpose();
  return m;
}

}  // namespace

void write_truth_json(const fs::path& path, const SyntheticTruth& truth) {
  json j;
  j["seed"] = truth.seed;
  j["car_ridge"] = truth.car_ridge;
  j["field_method"] = truth.field_method;
  j["covariate_mean"] = vec_json(truth.covariate_mean);
  j["covariate_sd"] = vec_json(truth.covariate_sd);
  json sites = json::array();
  for (const auto& s : truth.sites)
    sites.push_back({{"beta", vec_json(s.beta)}, {"gamma", s.gamma}, {"sigma2", s.sigma2}, {"z", vec_json(s.z)}});
  j["sites"] = std::move(sites);
  json cov = json::array();
  for (const auto& c : truth.covariate) cov.push_back({{"delta", vec_json(c.delta)}, {"sigma", mat_json(c.sigma)}});
  j["covariate"] = std::move(cov);
  auto out = open_out(path);
  out << j.dump(1) << '\n';
}

SyntheticTruth read_truth_json(const fs::path& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
    SyntheticTruth t;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.car_ridge = j.at("car_ridge").get<double>();
    t.field_method = j.at("field_method").get<std::string>();
    t.covariate_mean = json_vec(j.at("covariate_mean"));
    t.covariate_sd = json_vec(j.at("covariate_sd"));
    for (const auto& s : j.at("sites")) {
      SiteParams p;
      p.beta = json_vec(s.at("beta"));
      p.gamma = s.at("gamma").get<double>();
      p.sigma2 = s.at("sigma2").get<double>();
      p.z = json_vec(s.at("z"));
      t.sites.push_back(std::move(p));
    }
    for (const auto& c : j.at("covariate")) t.covariate.push_back({json_vec(c.at("delta")), json_mat(c.at("sigma"))});
    return t;
  } catch (const json::exception& e) {
    throw Error("E_PARSE", path.string() + ": " + e.what());
  }
}

void write_summary_csv(const fs::path& path, const StoreSummary& summary, const RunMetadata* meta) {
  CsvWriter w(path, meta, {"site_id", "parameter", "mean", "sd", "ess", "mcse"});
  for (const auto& r : summary.rows)
    w.row({std::to_string(r.site_id), r.parameter, format_double(r.mean), format_double(r.sd), format_double(r.ess),
           format_double(r.mcse)});
}

void write_comparison_csv(const fs::path& path, std::span<const ComparisonRow> rows, const RunMetadata* meta) {
  CsvWriter w(path, meta, {"site_id", "parameter", "mean_a", "mean_b", "diff", "mcse_a", "mcse_b", "standardized"});
  for (const auto& r : rows)
    w.row({std::to_string(r.site_id), r.parameter, format_double(r.mean_a), format_double(r.mean_b),
           format_double(r.diff()), format_double(r.mcse_a), format_double(r.mcse_b), format_double(r.standardized())});
}

void write_forecast_csv(const fs::path& path, const ForecastDraws& draws, const RunMetadata* meta) {
  CsvWriter w(path, meta, {"draw", "site_id", "horizon", "z", "y"});
  for (std::size_t m = 0; m < draws.n_draws; ++m)
    for (std::size_t i = 0; i < draws.n_sites; ++i)
      for (std::size_t h = 0; h < draws.horizon; ++h) {
        const auto k = draws.at(m, i, h);
        w.row({std::to_string(m + 1), std::to_string(draws.site_ids[i]), std::to_string(h + 1),
               format_double(draws.z[k]), std::to_string(draws.y[k])});
      }
}

bool files_identical(const fs::path& a, const fs::path& b) {
  if (!fs::exists(a) || !fs::exists(b)) return false;
  if (fs::file_size(a) != fs::file_size(b)) return false;
  auto ia = open_in(a, std::ios::binary), ib = open_in(b, std::ios::binary);
  return std::equal(std::istreambuf_iterator<char>(ia), std::istreambuf_iterator<char>(),
                    std::istreambuf_iterator<char>(ib), std::istreambuf_iterator<char>());
}

}  // namespace ordst::io
