#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "csiwb/capture.hpp"
#include "csiwb/cli.hpp"
#include "csiwb/export.hpp"

using namespace csiwb;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("csiwb_cli_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("cli exit codes") {
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"bogus"}).code == cli::kUsageError);
  CHECK(run({"clock", "--bw", "nope"}).code == cli::kUsageError);
  CHECK(run({"clock", "--bw", "1e9"}).code == cli::kUsageError);
  CHECK(run({"scan", "--cf", "2.412e9", "--sf", "20e6", "--out", tmp("x.csi"), "--mcs", "9"}).code ==
        cli::kUsageError);
  const auto missing = run({"info", "--in", tmp("does_not_exist.csi")});
  CHECK(missing.code == cli::kUsageError);
  CHECK_FALSE(missing.err.empty());
  CHECK(run({"scan", "--cf", "2.4e9:x:2.5e9", "--sf", "20e6", "--out", tmp("x.csi")}).code == cli::kUsageError);
  // Readable but useless input fails at run time.
  const std::string empty = tmp("exit_empty.csi");
  io::write_capture(empty, {});
  const auto fail = run({"cfosfo", "--in", empty});
  CHECK(fail.code == cli::kRuntimeFailure);
  CHECK_FALSE(fail.err.empty());
  std::filesystem::remove(empty);
  CHECK(run({"clock", "--bw", "20e6"}).code == cli::kOk);
}

TEST_CASE("cli clock") {
  const auto bw = run({"clock", "--bw", "20e6"});
  REQUIRE(bw.code == 0);
  CHECK(bw.out.find("(44, 5, 0, 0)") != std::string::npos);
  CHECK(bw.out.find("44.000000000 MHz") != std::string::npos);
  CHECK(bw.out.find("88.000000000 MHz") != std::string::npos);
  CHECK(bw.out.find("176.000000000 MHz") != std::string::npos);
  CHECK(bw.out.find("20.000000000 MHz") != std::string::npos);

  const auto cf = run({"clock", "--cf", "5.2e9", "--band", "5g"});
  REQUIRE(cf.code == 0);
  CHECK(cf.out.find("5199.999389") != std::string::npos);
  CHECK(cf.out.find("5200.000305") != std::string::npos);

  const auto quad = run({"clock", "--quad", "22,10,1,0"});
  REQUIRE(quad.code == 0);
  CHECK(quad.out.find("2.500000000 MHz") != std::string::npos);
  CHECK(run({"clock", "--quad", "22;10;1;0"}).code == cli::kUsageError);
}

TEST_CASE("cli scan is deterministic and feeds cfosfo") {
  const std::string a = tmp("scan_a.csi"), b = tmp("scan_b.csi");
  const std::vector<std::string> common{"scan", "--cf", "2.412e9:5e6:2.422e9", "--sf", "20e6", "--repeat", "3",
                                        "--fidelity", "analytic", "--seed", "11", "--loss", "0.1", "--cfo", "5000",
                                        "--snr", "30"};
  auto args_a = common;
  args_a.insert(args_a.end(), {"--out", a});
  auto args_b = common;
  args_b.insert(args_b.end(), {"--out", b});
  const auto ra = run(args_a);
  REQUIRE(ra.code == 0);
  REQUIRE(run(args_b).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a + ".json") == slurp(b + ".json"));
  CHECK(io::read_capture(a).records.size() == 9);

  const auto cs = run({"cfosfo", "--in", a});
  REQUIRE(cs.code == 0);
  std::smatch m;
  REQUIRE(std::regex_search(cs.out, m, std::regex("mean cfo (-?[0-9.]+) Hz")));
  CHECK(std::abs(std::stod(m[1].str()) - 5000.0) < 50.0);

  for (const auto& p : {a, b, a + ".json", b + ".json", a + ".responder.csi", b + ".responder.csi"})
    std::filesystem::remove(p);
}

TEST_CASE("cli export") {
  const std::string empty = tmp("empty.csi");
  io::write_capture(empty, {});
  const auto e = run({"export", "--in", empty, "--kind", "mag"});
  REQUIRE(e.code == 0);
  CHECK(e.out == std::string(io::kPlotHeader) + "\n");

  const std::string flat = tmp("flat.csi");
  REQUIRE(run({"loopback", "--profile", "clean", "--cf", "2.412e9", "--sf", "20e6", "--snr", "300", "--out", flat}).code == 0);
  const auto x = run({"export", "--in", flat, "--kind", "mag"});
  REQUIRE(x.code == 0);
  std::istringstream in(x.out);
  std::string line;
  std::getline(in, line);
  std::vector<double> mags;
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    mags.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
  }
  REQUIRE(mags.size() == 56);
  for (double v : mags) CHECK(std::abs(v - mags[0]) < 0.01);
  std::filesystem::remove(empty);
  std::filesystem::remove(flat);
}
