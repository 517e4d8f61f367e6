#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "carpet/cache.hpp"
#include "carpet/cli.hpp"
#include "carpet/io.hpp"

using namespace carpet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("carpet-test-" + hex32(rd()) + hex32(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::vector<std::string> data_lines(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);)
    if (!line.empty() && line[0] != '#' && line.rfind("address", 0) != 0) out.push_back(line);
  return out;
}

RealEigenSet small_set() {
  const auto g = build_graph(2);
  EigensolveRequest r;
  r.count = 6;
  return eigensolve(assemble_real(g, BoundarySpec::dirichlet()), r);
}

}  // namespace

TEST(Io, ExactFormattingRoundTrips) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = d(rng) * std::pow(10.0, (i % 40) - 20);
    EXPECT_EQ(parse_double(fmt_exact(x)), x);
  }
  EXPECT_EQ(fmt(1.0 / 3.0), "0.333333333333333");
  EXPECT_EQ(parse_double(" 2.5\r"), 2.5);
  EXPECT_THROW(parse_double("2.5x"), ConfigError);
}

TEST(Io, Crc32KnownValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32_bytes(s.data(), s.size()), 0xCBF43926u);
  EXPECT_EQ(hex32(0xCBF43926u), "cbf43926");
}

TEST(Io, FieldCsvRoundTrip) {
  const auto g = build_graph(2);
  Field f(64);
  for (Eigen::Index i = 0; i < 64; ++i) f[i] = std::sin(0.37 * static_cast<double>(i)) / 3.0;
  std::ostringstream os;
  write_field_csv(os, g, f, CsvHeader::standard(2, BoundarySpec::dirichlet(), 1.25, 10.0, 1e-9));
  {
    std::istringstream is(os.str());
    EXPECT_EQ(read_field_csv(is, g), f);
  }
  auto lines = data_lines(os.str());
  ASSERT_EQ(lines.size(), 64u);
  std::shuffle(lines.begin(), lines.end(), std::mt19937(9));
  std::string shuffled;
  for (const auto& l : lines) shuffled += l + '\n';
  {
    std::istringstream is(shuffled);
    EXPECT_EQ(read_field_csv(is, g), f);
  }
  {
    std::istringstream is(shuffled + lines[0] + '\n');
    EXPECT_THROW(read_field_csv(is, g), ConfigError);
  }
  {
    std::istringstream is(shuffled.substr(0, shuffled.rfind('\n', shuffled.size() - 2) + 1));
    EXPECT_THROW(read_field_csv(is, g), ConfigError);
  }
  std::ostringstream bad;
  EXPECT_THROW(write_field_csv(bad, g, Field::Zero(8)), ConfigError);
}

TEST(Io, PgmMarksHoles) {
  const auto g = build_graph(2);
  Field f(64);
  for (Eigen::Index i = 0; i < 64; ++i) f[i] = static_cast<double>(i);
  std::ostringstream os;
  write_pgm(os, g, f);
  const std::string s = os.str();
  const std::string header = "P5\n9 9\n255\n";
  ASSERT_EQ(s.substr(0, header.size()), header);
  ASSERT_EQ(s.size(), header.size() + 81);
  std::size_t zeros = 0;
  for (std::size_t i = header.size(); i < s.size(); ++i) zeros += s[i] == 0;
  EXPECT_EQ(zeros, 17u);
  EXPECT_EQ(static_cast<unsigned char>(s[header.size()]), 1);  // cell "00" holds the minimum
}

TEST(Io, GraphJsonRoundTrip) {
  const auto g = build_graph(3);
  auto j = graph_to_json(g);
  const auto back = graph_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.size(), g.size());
  EXPECT_EQ(graph_hash(back), graph_hash(g));
  auto tampered = j;
  tampered["edges"][5][1] = tampered["edges"][5][1].get<std::uint32_t>() + 1;
  EXPECT_THROW(graph_from_json(tampered), ConfigError);
  auto wrong = j;
  wrong["format"] = "other";
  EXPECT_THROW(graph_from_json(wrong), ConfigError);
}

TEST(Io, CacheStoresAndLoads) {
  TempDir tmp;
  const EigenCache cache(tmp.path);
  const auto set = small_set();
  CacheKey key{2, BoundarySpec::dirichlet(), 6, 1e-9, true};
  EXPECT_FALSE(cache.load<double>(key));
  cache.store(key, set);
  const auto back = cache.load<double>(key);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->values, set.values);
  EXPECT_EQ(back->fields, set.fields);
  EXPECT_EQ(back->level, set.level);
  for (const auto& e : fs::directory_iterator(tmp.path))
    EXPECT_EQ(e.path().string().find(".tmp"), std::string::npos) << e.path();
  CacheKey other = key;
  other.count = 7;
  EXPECT_FALSE(cache.load<double>(other));
  EXPECT_NE(cache.path_for(key), cache.path_for(other));
}

TEST(Io, CorruptCacheEntryIsDropped) {
  TempDir tmp;
  const EigenCache cache(tmp.path);
  CacheKey key{2, BoundarySpec::dirichlet(), 6, 1e-9, true};
  cache.store(key, small_set());
  const auto p = cache.path_for(key);
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(fs::file_size(p) / 2));
    char c = 0;
    f.read(&c, 1);
    f.seekp(static_cast<std::streamoff>(fs::file_size(p) / 2));
    c = static_cast<char>(c ^ 0x5a);
    f.write(&c, 1);
  }
  EXPECT_FALSE(cache.load<double>(key));
  EXPECT_FALSE(fs::exists(p));
}

TEST(Io, DisabledCacheIsInert) {
  const EigenCache cache;
  EXPECT_FALSE(cache.enabled());
  CacheKey key{2, BoundarySpec::dirichlet(), 6, 1e-9, true};
  cache.store(key, small_set());
  EXPECT_FALSE(cache.load<double>(key));
  EXPECT_TRUE(EigenCache::from_env(std::string("x")).enabled());
}

TEST(Io, CliGraphCommand) {
  TempDir tmp;
  RunConfig cfg;
  cfg.command = "graph";
  cfg.level = 1;
  cfg.out_dir = tmp.path.string();
  std::ostringstream out, err;
  ASSERT_EQ(run(cfg, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("cells 8\n"), std::string::npos);
  EXPECT_NE(out.str().find("virtual_cells 12\n"), std::string::npos);
  EXPECT_NE(out.str().find("edges 8\n"), std::string::npos);
  std::ifstream f(tmp.path / "graph_m1.json");
  ASSERT_TRUE(f);
  EXPECT_EQ(graph_from_json(nlohmann::json::parse(f)).size(), 8u);
}

TEST(Io, CliExitCodes) {
  TempDir tmp;
  std::ostringstream out, err;
  RunConfig cfg;
  cfg.out_dir = tmp.path.string();
  cfg.command = "nonsense";
  EXPECT_EQ(run(cfg, out, err), kExitConfig);
  cfg.command = "eigs";
  cfg.level = 2;
  cfg.bc = "mobius";
  EXPECT_EQ(run(cfg, out, err), kExitConfig);
  cfg.bc = "dirichlet";
  cfg.level = 3;
  cfg.max_eig_level = 2;
  EXPECT_EQ(run(cfg, out, err), kExitResource);
  cfg.max_eig_level = kMaxEigenLevel;
  cfg.tol = -1.0;
  EXPECT_EQ(run(cfg, out, err), kExitConfig);
  cfg.tol = 1e-9;
  cfg.level = 2;
  cfg.k = 5;
  EXPECT_EQ(run(cfg, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("eigenvalues 5\n"), std::string::npos);
  std::ifstream f(tmp.path / "eigs_m2_dirichlet.csv");
  ASSERT_TRUE(f);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("index,lambda,lambda_sc,label,residual\n"), std::string::npos);
}
