#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "peano/config.hpp"
#include "peano/error.hpp"
#include "peano/experiment.hpp"

using namespace peano;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"([potential]
family = "isotropic"
d = 1
gamma = 0.5
c = 0.6666666666666666

[grid]
n = 512
eigenpairs = 4

[sde]
ladder = [0.5, 0.4, 0.3, 0.25]
dt = 1e-3
n_paths = 2000
master_seed = 5

[targets]
t = [1.0]
x = [0.09, 0.25, 0.5]

[rates]
n_paths = 8
mesh = 200
)";

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "peano_config_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int lab(const std::string& args) {
  const std::string cmd = std::string(PEANO_LAB) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string config_error(const std::string& text) {
  try {
    load_experiment(ConfigDocument::parse(text, "test.cfg"));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  return {};
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

}  // namespace

TEST_CASE("config syntax") {
  const auto doc = ConfigDocument::parse(R"(
# leading comment
[a]
x = 1_000.5   # trailing comment
s = "has # inside"
flag = true
rows = [
  [1, 2],
  [3, 4],   # comment inside an array
]
bare = [0.1, 0.2]
)");
  CHECK(doc.number("a", "x") == 1000.5);
  CHECK(doc.string_or("a", "s", "") == "has # inside");
  CHECK(doc.at("a", "flag").is_bool());
  CHECK(doc.rows("a", "rows") == std::vector<std::vector<double>>{{1, 2}, {3, 4}});
  CHECK(doc.rows("a", "bare") == std::vector<std::vector<double>>{{0.1}, {0.2}});
  CHECK(doc.integer_or("a", "missing", 7) == 7);
  CHECK_THROWS_AS(doc.integer_or("a", "x", 0), Error);
  CHECK_THROWS_AS(doc.numbers("a", "s"), Error);

  CHECK_THROWS_AS(ConfigDocument::parse("x = 1\n"), Error);
  CHECK_THROWS_AS(ConfigDocument::parse("[a]\nx = 1\nx = 2\n"), Error);
  CHECK_THROWS_AS(ConfigDocument::parse("[a]\n[a]\n"), Error);
  CHECK_THROWS_AS(ConfigDocument::parse("[a]\nx = [1, 2\n"), Error);
  CHECK_THROWS_AS(ConfigDocument::parse("[a]\nx = 1.2.3\n"), Error);
  CHECK_THROWS_AS(ConfigDocument::from_file("/nonexistent/peano.cfg"), Error);
}

TEST_CASE("experiment configs") {
  const ExperimentConfig cfg = load_experiment(ConfigDocument::parse(kSmall, "small.cfg"));
  CHECK(cfg.potential.gamma == 0.5);
  CHECK(cfg.grid.n == 512);
  CHECK(cfg.sde.ladder.size() == 4);
  CHECK(cfg.targets.size() == 3);
  CHECK(cfg.targets[1].x[0] == 0.25);
  CHECK(resolved_config_json(cfg) == resolved_config_json(load_experiment(ConfigDocument::parse(kSmall, "x.cfg"))));

  const std::string unknown = config_error(replace(kSmall, "eigenpairs = 4", "eigenpairs = 4\nshift = 2"));
  CHECK(unknown.find("test.cfg:10: unknown key 'grid.shift'") != std::string::npos);
  const std::string gamma = config_error(replace(kSmall, "gamma = 0.5", "gamma = 1.2"));
  CHECK(gamma.find("potential.gamma") != std::string::npos);
  CHECK(gamma.find("1.2") != std::string::npos);
  CHECK(config_error(replace(kSmall, "[0.5, 0.4, 0.3, 0.25]", "[0.5, 0.4, 0.45, 0.25]")).find("sde.ladder") !=
        std::string::npos);
  CHECK(!config_error(replace(kSmall, "[sde]", "[sdee]")).empty());
  CHECK(!config_error(replace(kSmall, "\"isotropic\"", "\"quartic\"")).empty());
  CHECK_THROWS_AS(load_experiment("/nonexistent/peano.cfg"), Error);

  const ExperimentConfig shipped = load_experiment(std::string(PEANO_SOURCE_DIR) + "/configs/herrmann_1d.cfg");
  CHECK(shipped.sde.ladder == std::vector<double>{0.5, 0.35, 0.25, 0.177, 0.125});
  CHECK(shipped.sde.n_paths == 100000);
}

TEST_CASE("fnv1a64") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("command line exit codes") {
  const fs::path good = write_file("small.cfg", kSmall);
  const fs::path bad = write_file("bad.cfg", replace(kSmall, "gamma = 0.5", "gamma = 1.2"));
  CHECK(lab("verify --bogus") == 1);
  CHECK(lab("spectrum --config /nonexistent/peano.cfg") == 1);
  CHECK(lab("spectrum --config " + bad.string() + " --out " + (scratch() / "bad").string()) == 1);
  CHECK(lab("pipeline --config " + good.string() + " --stage nowhere --out " + (scratch() / "x").string()) != 0);
}

TEST_CASE("harmonic spectrum through the command line") {
  const fs::path cfg = write_file(
      "harmonic.cfg", "[potential]\nfamily = \"harmonic\"\nd = 1\n[grid]\nn = 2048\nL = 8\neigenpairs = 2\n");
  const fs::path out = scratch() / "harmonic";
  REQUIRE(lab("spectrum --config " + cfg.string() + " --out " + out.string()) == 0);
  const std::string json = slurp(out / "spectrum.json");
  const auto at = json.find("\"eigenvalues\"");
  REQUIRE(at != std::string::npos);
  const double l1 = std::stod(json.substr(json.find('[', at) + 1));
  CHECK(l1 == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(lab("pipeline --config " + cfg.string() + " --out " + (scratch() / "harmonic2").string()) == 1);
}

TEST_CASE("pipeline manifests do not depend on the worker count") {
  const fs::path cfg = write_file("small.cfg", kSmall);
  const fs::path a = scratch() / "run_w1", b = scratch() / "run_w3", c = scratch() / "run_again";
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
  REQUIRE(lab("pipeline --config " + cfg.string() + " --workers 1 --out " + a.string()) == 0);
  REQUIRE(lab("pipeline --config " + cfg.string() + " --workers 3 --out " + b.string()) == 0);
  REQUIRE(lab("pipeline --config " + cfg.string() + " --workers 2 --out " + c.string()) == 0);
  const std::string ma = slurp(a / "manifest.json");
  CHECK(!ma.empty());
  CHECK(ma == slurp(b / "manifest.json"));
  CHECK(ma == slurp(c / "manifest.json"));
  for (const char* f : {"spectrum.json", "g.csv", "ensemble_0.bin", "rate_fit_1.json", "path_rates.csv", "alpha.csv"})
    CHECK_MESSAGE((!slurp(a / f).empty() && slurp(a / f) == slurp(b / f)), f);

  const fs::path d = scratch() / "run_seed";
  fs::remove_all(d);
  REQUIRE(lab("pipeline --config " + cfg.string() + " --seed 6 --stage simulate --out " + d.string()) == 0);
  CHECK(slurp(d / "ensemble_0.bin") != slurp(a / "ensemble_0.bin"));
}
