// End-to-end tests of the evgnep binary. The path to the binary comes from
// the EVGNEP_CLI environment variable (set by the test harness).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

std::string cli_path() {
  const char* p = std::getenv("EVGNEP_CLI");
  REQUIRE_MESSAGE(p != nullptr, "EVGNEP_CLI must point at the evgnep binary");
  return p;
}

RunResult run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "evgnep_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), ("missing file: " + p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTwoCircleScene =
    "grid = 48 48\n"
    "timesteps = 0 0.1 0.2 0.3 0.4\n"
    "object = 14 16 4 22 6\n"
    "object = 34 32 4 -22 -5\n"
    "noise_events = 0\n";

// small GA settings keep the end-to-end runs fast
const char* kFastSolver =
    " --ga-population 30 --ga-stall-generations 20 --ga-max-generations 200";

}  // namespace

TEST_CASE("synth writes events and a manifest, deterministically per seed") {
  const auto dir = scratch_dir("synth");
  write_file(dir / "scene.txt", kTwoCircleScene);

  auto a = run("synth --scene " + (dir / "scene.txt").string() + " --seed 7 --out " +
               (dir / "a").string());
  CHECK(a.exit_code == 0);
  auto b = run("synth --scene " + (dir / "scene.txt").string() + " --seed 7 --out " +
               (dir / "b").string());
  CHECK(b.exit_code == 0);
  CHECK(read_file(dir / "a" / "events.csv") == read_file(dir / "b" / "events.csv"));

  auto c = run("synth --scene " + (dir / "scene.txt").string() + " --seed 8 --out " +
               (dir / "c").string());
  CHECK(c.exit_code == 0);
  // the ring rasterization is seed-independent with zero noise, so add noise
  // only to the manifest check: the manifest must record the seed
  const std::string manifest = read_file(dir / "a" / "manifest.txt");
  CHECK(manifest.find("seed = 7") != std::string::npos);
  CHECK(manifest.find("num_events") != std::string::npos);

  // events.csv rows are x,y,t,label
  const std::string events = read_file(dir / "a" / "events.csv");
  int x = 0, y = 0, label = -1;
  double t = -1.0;
  REQUIRE(std::sscanf(events.c_str(), "%d,%d,%lf,%d", &x, &y, &t, &label) == 4);
  CHECK(x >= 1);
  CHECK(y >= 1);
  CHECK(t >= 0.0);
  CHECK(label >= 0);
}

TEST_CASE("segment produces result, per-player csv/images, and a rerunnable manifest") {
  const auto dir = scratch_dir("segment");
  write_file(dir / "scene.txt", kTwoCircleScene);
  REQUIRE(run("synth --scene " + (dir / "scene.txt").string() + " --seed 3 --out " +
              (dir / "in").string())
              .exit_code == 0);

  const std::string events = (dir / "in" / "events.csv").string();
  auto seg = run("segment --events " + events + " --grid 48 48 --players 2 --seed 5" +
                 kFastSolver + " --out " + (dir / "run1").string());
  CHECK(seg.exit_code == 0);
  for (const char* f : {"result.txt", "player1.csv", "player2.csv", "player1_warped.pgm",
                        "player2_warped.pgm", "composite.pgm", "manifest.txt"})
    CHECK_MESSAGE(fs::exists(dir / "run1" / f), f);

  // player CSVs are disjoint: no (x,y,t) row appears in both
  auto rows = [&](const fs::path& p) {
    std::istringstream in(read_file(p));
    std::set<std::string> out;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line))
      if (!line.empty()) out.insert(line.substr(0, line.rfind(',')));  // strip label column
    return out;
  };
  const auto r1 = rows(dir / "run1" / "player1.csv");
  const auto r2 = rows(dir / "run1" / "player2.csv");
  for (const auto& row : r1) CHECK(r2.count(row) == 0);
  CHECK(!r1.empty());
  CHECK(!r2.empty());

  // rerun from the manifest alone: byte-identical result
  auto rerun = run("segment --config " + (dir / "run1" / "manifest.txt").string() + " --out " +
                   (dir / "run2").string());
  CHECK(rerun.exit_code == 0);
  CHECK(read_file(dir / "run1" / "result.txt") == read_file(dir / "run2" / "result.txt"));
  CHECK(read_file(dir / "run1" / "player1.csv") == read_file(dir / "run2" / "player1.csv"));
  CHECK(read_file(dir / "run1" / "composite.pgm") == read_file(dir / "run2" / "composite.pgm"));
}

TEST_CASE("verify passes on an untouched result and fails on a tampered one") {
  const auto dir = scratch_dir("verify");
  write_file(dir / "scene.txt", kTwoCircleScene);
  REQUIRE(run("synth --scene " + (dir / "scene.txt").string() + " --seed 3 --out " +
              (dir / "in").string())
              .exit_code == 0);
  const std::string events = (dir / "in" / "events.csv").string();
  REQUIRE(run("segment --events " + events + " --grid 48 48 --players 2 --seed 5" + kFastSolver +
              " --out " + (dir / "run").string())
              .exit_code == 0);

  const std::string result = (dir / "run" / "result.txt").string();
  auto ok = run("verify --result " + result + " --events " + events + " --report " +
                (dir / "report.txt").string());
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("verify: pass") != std::string::npos);
  CHECK(read_file(dir / "report.txt").find("overall = pass") != std::string::npos);

  // tamper: duplicate player 1's z into player 2 (budget + masking break)
  std::string text = read_file(result);
  const auto z_first = text.find("z = ");
  REQUIRE(z_first != std::string::npos);
  const auto z_line = text.substr(z_first, text.find('\n', z_first) - z_first);
  const auto z_second = text.find("z = ", z_first + 1);
  REQUIRE(z_second != std::string::npos);
  text.replace(z_second, text.find('\n', z_second) - z_second, z_line);
  write_file(dir / "tampered.txt", text);

  auto bad = run("verify --result " + (dir / "tampered.txt").string() + " --events " + events);
  CHECK(bad.exit_code == 3);
  CHECK(bad.output.find("FAIL") != std::string::npos);
}

TEST_CASE("render writes player layers and projections, byte-identically") {
  const auto dir = scratch_dir("render");
  write_file(dir / "scene.txt", kTwoCircleScene);
  REQUIRE(run("synth --scene " + (dir / "scene.txt").string() + " --seed 3 --out " +
              (dir / "in").string())
              .exit_code == 0);
  const std::string events = (dir / "in" / "events.csv").string();
  REQUIRE(run("segment --events " + events + " --grid 48 48 --players 2 --seed 5" + kFastSolver +
              " --out " + (dir / "run").string())
              .exit_code == 0);

  const std::string result = (dir / "run" / "result.txt").string();
  auto a = run("render --result " + result + " --events " + events + " --out " +
               (dir / "img_a").string());
  CHECK(a.exit_code == 0);
  auto b = run("render --result " + result + " --events " + events + " --out " +
               (dir / "img_b").string());
  CHECK(b.exit_code == 0);
  for (const char* f :
       {"player1_warped.pgm", "player2_warped.pgm", "composite.pgm", "proj_xy.pgm", "proj_xt.pgm",
        "proj_yt.pgm"}) {
    CHECK_MESSAGE(fs::exists(dir / "img_a" / f), f);
    CHECK(read_file(dir / "img_a" / f) == read_file(dir / "img_b" / f));
    const std::string pgm = read_file(dir / "img_a" / f);
    CHECK(pgm.rfind("P2", 0) == 0);
  }
}

TEST_CASE("validation failures exit with code 1") {
  const auto dir = scratch_dir("validation");
  auto missing = run("segment --events " + (dir / "nope.csv").string() +
                     " --grid 16 16 --players 1 --out " + (dir / "out").string());
  CHECK(missing.exit_code == 1);
  CHECK(missing.output.find("error") != std::string::npos);

  write_file(dir / "bad.csv", "x,y,t\n3,3,0.0\n99,3,1.0\n");
  auto out_of_grid = run("segment --events " + (dir / "bad.csv").string() +
                         " --grid 16 16 --players 1 --out " + (dir / "out").string());
  CHECK(out_of_grid.exit_code == 1);

  write_file(dir / "tiny.csv", "x,y,t\n3,3,0.0\n4,3,1.0\n");
  auto no_input = run("segment --players 1 --out " + (dir / "out").string());
  CHECK(no_input.exit_code == 1);

  auto bad_alpha = run("segment --events " + (dir / "tiny.csv").string() +
                       " --grid 16 16 --players 1 --alpha 0.5 --out " + (dir / "out").string());
  CHECK(bad_alpha.exit_code == 1);
}

TEST_CASE("infeasible levels exit with the solver code") {
  const auto dir = scratch_dir("solver_fail");
  write_file(dir / "tiny.csv", "x,y,t\n3,3,0\n5,3,0.5\n7,3,1\n9,3,1.5\n");
  auto r = run("segment --events " + (dir / "tiny.csv").string() +
               " --grid 16 16 --players 4 --seed 1" + std::string(kFastSolver) + " --out " +
               (dir / "out").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("solver failure") != std::string::npos);
  CHECK(r.output.find("level") != std::string::npos);
}

TEST_CASE("keep-window filtering changes the event count seen by segment") {
  const auto dir = scratch_dir("window");
  write_file(dir / "scene.txt", kTwoCircleScene);
  REQUIRE(run("synth --scene " + (dir / "scene.txt").string() + " --seed 3 --out " +
              (dir / "in").string())
              .exit_code == 0);
  const std::string events = (dir / "in" / "events.csv").string();
  auto full = run("segment --events " + events + " --grid 48 48 --players 1 --seed 5" +
                  kFastSolver + " --out " + (dir / "full").string());
  CHECK(full.exit_code == 0);
  auto cut = run("segment --events " + events +
                 " --grid 48 48 --players 1 --seed 5 --keep-window 0:0.2" + kFastSolver +
                 " --out " + (dir / "cut").string());
  CHECK(cut.exit_code == 0);
  auto count = [](const std::string& s) {
    const auto pos = s.find("segment: ");
    const auto comma = s.find("players, ", pos);
    return std::stoi(s.substr(comma + 9));
  };
  CHECK(count(cut.output) < count(full.output));

  auto empty = run("segment --events " + events +
                   " --grid 48 48 --players 1 --seed 5 --keep-window 900:901 --out " +
                   (dir / "empty").string());
  CHECK(empty.exit_code == 1);
}
