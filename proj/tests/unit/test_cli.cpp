#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "lipspline/checkpoint.hpp"
#include "lipspline/io.hpp"
#include "lipspline_cli/cli.hpp"

namespace fs = std::filesystem;
using namespace lipspline;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("lipspline_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "lipspline");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " = ");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 3));
}

std::string write_config(const TempDir& dir, const std::string& body) {
  const fs::path p = dir / "run.cfg";
  write_file_atomic(p, body);
  return p.string();
}

std::string spline_checkpoint(const TempDir& dir, SplineInit init) {
  NetworkSpec spec;
  spec.widths = {1, 4, 1};
  spec.activation.kind = ActivationKind::Lls;
  spec.activation.spline_init = init;
  const fs::path p = dir / "net.ckpt";
  save_checkpoint(p, Network(spec));
  return p.string();
}

const char* kSmallFit =
    "net.widths = 1, 6, 1\n"
    "train.epochs = 3\n"
    "train_points = 200\n"
    "test_points = 100\n"
    "audit_pairs = 100\n";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fit1d writes metrics, a checkpoint and resolved settings") {
    TempDir dir("fit");
    const auto cfg = write_config(dir, kSmallFit);
    const Outcome r = invoke({"--config", cfg, "--out", (dir / "o").string(), "fit1d"});
    REQUIRE(r.code == 0);
    CHECK(value_after(r.out, "test_mse") >= 0.0);
    const std::string metrics = read_file(dir / "o" / "metrics.csv");
    CHECK(metrics.substr(0, metrics.find('\n')).find("test_mse") != std::string::npos);
    CHECK(fs::exists(dir / "o" / "checkpoint.ckpt"));
    const std::string resolved = read_file(dir / "o" / "config.resolved");
    CHECK(resolved.find("train.epochs = 3") != std::string::npos);
    CHECK(resolved.find("train.eta = ") != std::string::npos);
  }

  TEST_CASE("identical seeds give byte-identical output") {
    TempDir dir("seed");
    const auto cfg = write_config(dir, kSmallFit);
    REQUIRE(invoke({"--config", cfg, "--seed", "4", "--out", (dir / "a").string(), "fit1d"}).code == 0);
    REQUIRE(invoke({"--config", cfg, "--seed", "4", "--out", (dir / "b").string(), "fit1d"}).code == 0);
    CHECK(read_file(dir / "a" / "metrics.csv") == read_file(dir / "b" / "metrics.csv"));
    CHECK(read_file(dir / "a" / "checkpoint.ckpt") == read_file(dir / "b" / "checkpoint.ckpt"));
  }

  TEST_CASE("audit of a fresh spline network") {
    TempDir dir("audit");
    const auto cfg = write_config(dir, "net.activation = lls\naudit.pairs = 2000\n");
    const Outcome r = invoke({"--config", cfg, "--out", dir.path().string(), "audit"});
    REQUIRE(r.code == 0);
    CHECK(value_after(r.out, "max_ratio") <= 1.0 + 1e-6);
    CHECK(fs::exists(dir / "audit.csv"));
  }

  TEST_CASE("refused certificate exits with code 3") {
    TempDir dir("pnp");
    const auto cfg = write_config(dir, "model = identity\ndenoiser = zero\nbeta = 0.6\nphantom.size = 32\n");
    const Outcome r = invoke({"--config", cfg, "--out", dir.path().string(), "pnp", "--certify", "prop3"});
    CHECK(r.code == 3);
    CHECK(r.err.find("beta <= 1/2") != std::string::npos);
  }

  TEST_CASE("pnp with an averaged zero denoiser certifies and reconstructs") {
    TempDir dir("pnp_ok");
    const auto cfg = write_config(dir, "model = identity\ndenoiser = zero\nbeta = 0.5\nphantom.size = 32\n");
    const Outcome r = invoke({"--config", cfg, "--out", dir.path().string(), "pnp", "--certify", "prop3"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "certificate.csv"));
    CHECK(fs::exists(dir / "recon.pgm"));
  }

  TEST_CASE("inspect-spline reports TV(2) and AELR") {
    TempDir dir("inspect");
    const Outcome id = invoke({"--out", dir.path().string(), "inspect-spline", "--checkpoint",
                               spline_checkpoint(dir, SplineInit::Identity)});
    REQUIRE(id.code == 0);
    CHECK(value_after(id.out, "tv2") == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(value_after(id.out, "aelr") == 1.0);
    const std::string csv = read_file(dir / "spline.csv");
    CHECK(csv.substr(0, csv.find('\n')) == "knot_position,coefficient,second_difference");

    const Outcome relu = invoke({"--out", dir.path().string(), "inspect-spline", "--checkpoint",
                                 spline_checkpoint(dir, SplineInit::Relu), "--neuron", "3"});
    REQUIRE(relu.code == 0);
    CHECK(value_after(relu.out, "aelr") == 2.0);

    const Outcome bad = invoke({"--out", dir.path().string(), "inspect-spline", "--checkpoint",
                                spline_checkpoint(dir, SplineInit::Relu), "--layer", "5"});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("out of range") != std::string::npos);
  }

  TEST_CASE("configuration errors exit with code 1") {
    TempDir dir("errors");
    const auto cfg = write_config(dir, "net.widthz = 1, 2, 1\n");
    const Outcome unknown = invoke({"--config", cfg, "--out", dir.path().string(), "audit"});
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("net.widthz") != std::string::npos);
    CHECK(invoke({"frobnicate"}).code == 1);
    CHECK(invoke({}).code == 1);
    CHECK(invoke({"--help"}).code == 0);
  }
}
