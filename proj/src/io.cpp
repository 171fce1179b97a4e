#include "cbf/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace cbf {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw io_error("malformed numeric field: '" + s + "'");
  }
  return v;
}

void write_rcov(const std::string& path, const MatrixSeries& series) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << "#rcov v1 n=" << series.n << " T=" << series.T() << "\n";
  for (int t = 0; t < series.T(); ++t) {
    const VectorXd v = vech(series[t].m());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i > 0) out << ' ';
      out << format_double(v(i));
    }
    out << '\n';
  }
  if (!out) throw io_error("write failed: " + path);
}

MatrixSeries read_rcov(const std::string& path, const LoadOptions& opts, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty file: " + path);
  int n = 0, T = 0;
  {
    std::istringstream hs(line);
    std::string tag, ver, nf, tf;
    hs >> tag >> ver >> nf >> tf;
    if (tag != "#rcov" || ver != "v1" || nf.rfind("n=", 0) != 0 || tf.rfind("T=", 0) != 0) {
      throw io_error("bad header in " + path + ": '" + line + "'");
    }
    try {
      n = std::stoi(nf.substr(2));
      T = std::stoi(tf.substr(2));
    } catch (const std::exception&) {
      throw io_error("bad header dimensions in " + path);
    }
  }
  if (n < 1 || T < 0) throw io_error("bad header dimensions in " + path);
  const int d = n * (n + 1) / 2;

  MatrixSeries series;
  series.n = n;
  LoadReport rep;
  rep.ridge = opts.ridge;
  VectorXd v(d);
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    int k = 0;
    while (ls >> field) {
      if (k >= d) throw io_error("record " + std::to_string(row + 1) + " too long in " + path);
      v(k++) = parse_double(field);
    }
    if (k != d) throw io_error("record " + std::to_string(row + 1) + " too short in " + path);
    MatrixXd m = unvech_sym(v);
    try {
      series.push(SpdMatrix(m));
    } catch (const std::exception&) {
      if (opts.ridge > 0.0) {
        m += opts.ridge * MatrixXd::Identity(n, n);
        try {
          series.push(SpdMatrix(m));
        } catch (const std::exception&) {
          throw io_error("record " + std::to_string(row + 1) + " in " + path +
                         " is not positive definite even after the ridge repair");
        }
        ++rep.repaired;
      } else {
        throw io_error("record " + std::to_string(row + 1) + " in " + path +
                       " is not positive definite (consider --ridge)");
      }
    }
    ++row;
  }
  if (row != T) {
    throw io_error("header announces T=" + std::to_string(T) + " but " + path + " holds " +
                   std::to_string(row) + " records");
  }
  if (report) *report = rep;
  return series;
}

}  // namespace cbf
