#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "pdpp/cli.hpp"
#include "pdpp/format.hpp"
#include "pdpp/io.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace pdpp;
using pdpp::test::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Data rows of a CSV (comment lines and the header dropped).
std::vector<std::vector<std::string>> csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> row;
    for (auto f : split(line, ",")) row.emplace_back(f);
    rows.push_back(row);
  }
  return rows;
}

void write_movielens(const std::filesystem::path& dir, const pdpp::test::SyntheticData& d) {
  std::ofstream r(dir / "ratings.dat");
  for (const auto& rec : d.ratings.records) {
    r << rec.user << "::" << rec.item << "::" << format_double(*rec.rating)
      << "::" << format_double(rec.timestamp) << '\n';
  }
  std::ofstream m(dir / "movies.dat");
  for (const auto& item : d.catalog.items()) {
    m << item.id << "::" << item.title << "::";
    for (std::size_t g = 0; g < item.genres.size(); ++g) m << (g ? "|" : "") << item.genres[g];
    m << '\n';
  }
}

}  // namespace

TEST_CASE("help lists subcommands and defaults") {
  auto top = cli({"--help"});
  CHECK(top.code == 0);
  for (const char* sub : {"ingest", "init-alpha", "evaluate", "rerank-file", "serve"}) {
    CHECK(top.out.find(sub) != std::string::npos);
  }
  auto eval = cli({"evaluate", "--help"});
  CHECK(eval.code == 0);
  CHECK(eval.out.find("0.7") != std::string::npos);
  auto serve = cli({"serve", "--help"});
  CHECK(serve.out.find("8080") != std::string::npos);
  CHECK(serve.out.find("PDPP_PORT") != std::string::npos);

  CHECK(cli({}).code != 0);
  CHECK(cli({"frobnicate"}).code != 0);
}

TEST_CASE("ingest, init-alpha and evaluate") {
  TempDir dir("cli");
  const auto data = pdpp::test::synthetic_movielens(60, 100, 4);
  write_movielens(dir.path, data);

  auto ingest = cli({"ingest", "--ratings", (dir.path / "ratings.dat").string(), "--movies",
                     (dir.path / "movies.dat").string(), "--out-dir", (dir.path / "norm").string()});
  CHECK(ingest.code == 0);
  const auto norm = read_ratings(dir.path / "norm" / "ratings.csv");
  CHECK(norm.records.size() == data.ratings.records.size());
  CHECK(read_catalog(dir.path / "norm" / "catalog.tsv").size() == data.catalog.size());

  std::set<std::string> users;
  for (const auto& r : data.ratings.records) users.insert(r.user);
  const auto snap = dir.path / "alpha.csv";
  auto init = cli({"init-alpha", "--ratings", (dir.path / "norm" / "ratings.csv").string(), "--movies",
                   (dir.path / "norm" / "catalog.tsv").string(), "--alpha0", "0.5", "--l", "hmin",
                   "--out", snap.string(), "--histogram", (dir.path / "hist.csv").string()});
  CHECK(init.code == 0);
  CHECK(csv_rows(snap).size() == users.size());
  CHECK(std::filesystem::exists(dir.path / "hist.csv"));
  std::ifstream snap_in(snap);
  const std::string text((std::istreambuf_iterator<char>(snap_in)), {});
  CHECK(text.find("# alpha_0=0.5") != std::string::npos);
  CHECK(text.find("# l_spec=hmin") != std::string::npos);

  auto eval = cli({"evaluate", "--ratings", (dir.path / "ratings.dat").string(), "--movies",
                   (dir.path / "movies.dat").string(), "--grid", "BASE;DPP(0.02)", "--min-item-raters",
                   "5", "--min-user-ratings", "10", "--out-dir", (dir.path / "report").string()});
  CHECK(eval.code == 0);
  CHECK(csv_rows(dir.path / "report" / "report.csv").size() == 2);
  CHECK(std::filesystem::exists(dir.path / "report" / "report.json"));
  CHECK(std::filesystem::exists(dir.path / "report" / "entropy_hist.csv"));
  CHECK(eval.out.find("DPP(a=0.02)") != std::string::npos);

  // Config file plus flag override.
  {
    std::ofstream cfg(dir.path / "exp.cfg");
    cfg << "ratings = " << (dir.path / "ratings.dat").string() << "\n"
        << "movies = " << (dir.path / "movies.dat").string() << "\n"
        << "min_item_raters = 5\nmin_user_ratings = 10\ngrid = BASE;DPP(0.1);DPP(0.2)\n"
        << "output_dir = " << (dir.path / "cfg_report").string() << "\n";
  }
  auto from_cfg = cli({"evaluate", "--config", (dir.path / "exp.cfg").string(), "--grid", "BASE"});
  CHECK(from_cfg.code == 0);
  CHECK(csv_rows(dir.path / "cfg_report" / "report.csv").size() == 1);
}

TEST_CASE("rerank-file") {
  TempDir dir("rerank");
  {
    std::ofstream cat(dir.path / "catalog.tsv");
    for (int i = 0; i < 12; ++i) cat << "m" << i << "\tMovie\t" << (i % 2 ? "A" : "B") << '\n';
    std::ofstream in(dir.path / "scores.csv");
    in << "user_id,item_id,score\n";
    for (int i = 0; i < 12; ++i) in << "u1,m" << i << ',' << (0.9 - 0.05 * ((i * 7) % 12)) << '\n';
    for (int i = 0; i < 6; ++i) in << "u2,m" << i << ',' << (0.2 + 0.1 * i) << '\n';
  }
  const auto out = dir.path / "out.csv";
  auto zero = cli({"rerank-file", "--input", (dir.path / "scores.csv").string(), "--movies",
                   (dir.path / "catalog.tsv").string(), "--alpha", "0", "--k", "4", "--output",
                   out.string()});
  CHECK(zero.code == 0);
  const auto rows = csv_rows(out);
  REQUIRE(rows.size() == 8);
  // Score order: u1's items sorted by the synthetic scores, u2 reversed.
  std::vector<std::pair<double, std::string>> u1;
  for (int i = 0; i < 12; ++i) u1.emplace_back(0.9 - 0.05 * ((i * 7) % 12), "m" + std::to_string(i));
  std::sort(u1.begin(), u1.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (int r = 0; r < 4; ++r) {
    CHECK(rows[r][0] == "u1");
    CHECK(rows[r][1] == std::to_string(r + 1));
    CHECK(rows[r][2] == u1[r].second);
  }
  CHECK(rows[4][2] == "m5");
  CHECK(rows[5][2] == "m4");

  auto diverse = cli({"rerank-file", "--input", (dir.path / "scores.csv").string(), "--movies",
                      (dir.path / "catalog.tsv").string(), "--alpha", "1", "--k", "2", "--output",
                      out.string()});
  CHECK(diverse.code == 0);
  const auto drows = csv_rows(out);
  // Two genres alternate: a diverse pair never repeats a genre.
  const int a = std::stoi(drows[0][2].substr(1));
  const int b = std::stoi(drows[1][2].substr(1));
  CHECK(a % 2 != b % 2);

  auto both = cli({"rerank-file", "--input", (dir.path / "scores.csv").string(), "--movies",
                   (dir.path / "catalog.tsv").string()});
  CHECK(both.code == 1);
  CHECK(both.err.find("[validate]") != std::string::npos);
}

TEST_CASE("failures are stage tagged") {
  auto missing = cli({"init-alpha", "--ratings", "/nonexistent/r.csv", "--movies", "/nonexistent/m.dat"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("[load]") != std::string::npos);

  auto bad_l = cli({"init-alpha", "--ratings", "x", "--movies", "y", "--l", "-3"});
  CHECK(bad_l.code == 1);
  CHECK(bad_l.err.find("[validate]") != std::string::npos);

  TempDir dir("cfgerr");
  {
    std::ofstream cfg(dir.path / "bad.cfg");
    cfg << "k = zero\n";
  }
  auto bad_cfg = cli({"evaluate", "--config", (dir.path / "bad.cfg").string()});
  CHECK(bad_cfg.code == 1);
  CHECK(bad_cfg.err.find("[config]") != std::string::npos);
}
