#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include "vidplan/profiles.hpp"

using namespace vidplan;

namespace {

std::string dump(const ProfileStore& s) {
  std::ostringstream os;
  save_profiles(s, os);
  return os.str();
}

}  // namespace

TEST(Profiles, RichestFidelityIsGroundTruth) {
  const auto k = default_knob_space();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto store = generate_synthetic(seed, k, 3);
    for (const auto& op : store.operators()) {
      EXPECT_DOUBLE_EQ(store.query_operator(op, k.richest()).accuracy, 1.0);
      EXPECT_LT(store.query_operator(op, k.poorest()).accuracy, 1.0);
    }
  }
}

TEST(Profiles, MemoizationCountsDistinctKeys) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(1, k, 2);
  EXPECT_EQ(store.operator_runs(), 0u);
  store.query_operator("op0", k.richest());
  store.query_operator("op0", k.richest());
  EXPECT_EQ(store.operator_runs(), 1u);
  store.query_operator("op1", k.richest());
  store.query_operator("op0", k.poorest());
  EXPECT_EQ(store.operator_runs(), 3u);

  store.query_coding(k.richest(), {0, 0, false}, 1.0);
  store.query_coding(k.richest(), {0, 0, false}, 8.0);
  EXPECT_EQ(store.coding_runs(), 1u);

  auto fresh = store.fork();
  EXPECT_EQ(fresh.operator_runs(), 0u);
  fresh.query_operator("op0", k.richest());
  EXPECT_EQ(fresh.operator_runs(), 1u);
  EXPECT_EQ(store.operator_runs(), 3u);

  store.clear_cache();
  EXPECT_EQ(store.operator_runs(), 0u);
}

TEST(Profiles, MemoizationDoesNotChangeAnswers) {
  const auto k = default_knob_space();
  auto cached = generate_synthetic(4, k, 2);
  auto uncached = cached.fork();
  uncached.set_memoize(false);
  std::mt19937_64 rng(11);
  const auto fids = k.fidelities();
  std::uniform_int_distribution<std::size_t> pick(0, fids.size() - 1);
  std::set<std::pair<std::string, std::size_t>> keys;
  for (int i = 0; i < 500; ++i) {
    const auto& f = fids[pick(rng)];
    const std::string op = (i % 3 == 0) ? "op1" : "op0";
    keys.insert({op, k.fidelity_index(f)});
    EXPECT_EQ(cached.query_operator(op, f), uncached.query_operator(op, f));
  }
  EXPECT_EQ(cached.operator_runs(), keys.size());
  EXPECT_EQ(uncached.operator_runs(), 500u);
}

TEST(Profiles, ConcurrentQueriesCountLikeSerial) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(2, k, 1);
  const auto fids = k.fidelities();
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < fids.size() + 40; i += 2) {
        store.query_operator("op0", fids[i % fids.size()]);
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(store.operator_runs(), fids.size());
}

TEST(Profiles, UnknownOperatorAndMissingPoint) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(1, k, 1);
  try {
    store.query_operator("nope", k.richest());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownOperator);
  }
  ProfileStore sparse(k);
  sparse.add_operator("x");
  try {
    sparse.query_operator("x", k.richest());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingProfilePoint);
  }
  try {
    sparse.query_coding(k.richest(), CodingOption::raw());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingProfilePoint);
  }
}

TEST(Profiles, SyntheticMonotonicityExhaustive) {
  const auto k = default_knob_space();
  const auto fids = k.fidelities();
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto store = generate_synthetic(seed, k, 4);
    EXPECT_TRUE(check_monotonicity(store).empty()) << "seed " << seed;
    for (const auto& op : store.operators()) {
      for (const auto& a : fids) {
        const auto pa = *store.operator_entry(op, a);
        for (const auto& b : fids) {
          if (!can_degrade(a, b)) continue;
          const auto pb = *store.operator_entry(op, b);
          ASSERT_GE(pa.accuracy, pb.accuracy);
          ASSERT_LE(pa.consumption_speed, pb.consumption_speed * (1 + 1e-12));
          if (a.sampling == b.sampling && a.resolution == b.resolution &&
              a.crop == b.crop) {
            ASSERT_EQ(pa.consumption_speed, pb.consumption_speed);
          }
        }
      }
    }
  }
}

TEST(Profiles, QualityAmplifiesResolutionLoss) {
  const auto k = default_knob_space();
  const int r720 = k.resolution.index_of("720p");
  const int r540 = k.resolution.index_of("540p");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto store = generate_synthetic(seed, k, 3);
    for (const auto& op : store.operators()) {
      for (int s = 0; s < 5; ++s) {
        for (int c = 0; c < 3; ++c) {
          auto drop = [&](int q) {
            return store.operator_entry(op, {s, r720, c, q})->accuracy -
                   store.operator_entry(op, {s, r540, c, q})->accuracy;
          };
          EXPECT_GT(drop(0), drop(k.quality.richest()))
              << "seed " << seed << " " << op;
        }
      }
    }
  }
}

TEST(Profiles, CodingDirections) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(3, k, 1);
  for (const auto& f : k.fidelities()) {
    const auto raw = store.query_coding(f, CodingOption::raw(), 4.0);
    EXPECT_TRUE(std::isinf(raw.decode_speed));
    const double raw_bitrate = 30.0 * k.sampling.values[f.sampling] *
                               k.resolution.values[f.resolution] *
                               k.crop.values[f.crop] * 1.5 / 1e6;
    EXPECT_NEAR(raw.bitrate, raw_bitrate, 1e-12 * raw_bitrate);
    for (int s = 0; s < 5; ++s) {
      for (int kf = 0; kf + 1 < 5; ++kf) {
        // Smaller keyframe interval: more bitrate, and faster once the
        // sampling interval lets the decoder skip whole chunks.
        const double n = 2 * k.keyframe.values[kf];
        const auto small = store.query_coding(f, {s, kf, false}, n);
        const auto large = store.query_coding(f, {s, kf + 1, false}, n);
        EXPECT_GT(small.bitrate, large.bitrate);
        EXPECT_GT(small.decode_speed, large.decode_speed);
        for (double m : {1.0, 7.0, 40.0, 300.0}) {
          EXPECT_GE(store.query_coding(f, {s, kf, false}, m).decode_speed,
                    store.query_coding(f, {s, kf + 1, false}, m).decode_speed);
        }
      }
    }
    for (int kf = 0; kf < 5; ++kf) {
      for (int s = 0; s + 1 < 5; ++s) {
        const auto slow = store.query_coding(f, {s, kf, false});
        const auto fast = store.query_coding(f, {s + 1, kf, false});
        EXPECT_LT(slow.bitrate, fast.bitrate);
        EXPECT_GT(slow.encode_cost, fast.encode_cost);
      }
    }
  }
}

TEST(Profiles, DecodeSpeedNonDecreasingInSamplingInterval) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(3, k, 1);
  const auto f = k.richest();
  for (const auto& c : k.codings()) {
    if (c.bypass) continue;
    double prev = 0.0;
    double prev_bitrate = -1.0;
    for (double n = 1; n <= 240; n += 1) {
      const auto p = store.query_coding(f, c, n);
      EXPECT_GE(p.decode_speed, prev);
      if (prev_bitrate >= 0) {
        EXPECT_EQ(p.bitrate, prev_bitrate);
      }
      prev = p.decode_speed;
      prev_bitrate = p.bitrate;
    }
    const auto base = store.query_coding(f, c, 1.0);
    const double kf = k.keyframe.values[c.keyframe];
    const auto skip = store.query_coding(f, c, 2 * kf);
    EXPECT_DOUBLE_EQ(skip.decode_speed, base.decode_speed * 2.0);
  }
}

TEST(Profiles, DeterministicPerSeed) {
  const auto k = default_knob_space();
  EXPECT_EQ(dump(generate_synthetic(9, k, 3)), dump(generate_synthetic(9, k, 3)));
  EXPECT_NE(dump(generate_synthetic(9, k, 3)), dump(generate_synthetic(10, k, 3)));
}

TEST(Profiles, CsvRoundTrip) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(5, k, 2);
  const std::string text = dump(store);
  std::istringstream is(text);
  auto loaded = load_profiles(is, k);
  EXPECT_TRUE(loaded.warnings().empty());
  EXPECT_EQ(loaded.operators(), store.operators());
  for (const auto& op : store.operators()) {
    for (const auto& f : k.fidelities()) {
      EXPECT_EQ(loaded.query_operator(op, f), store.query_operator(op, f));
    }
  }
  for (const auto& f : k.fidelities()) {
    for (const auto& c : k.codings()) {
      EXPECT_EQ(loaded.query_coding(f, c, 3.0), store.query_coding(f, c, 3.0));
    }
  }
  EXPECT_EQ(dump(loaded), text);
}

TEST(Profiles, CsvEmptyOperatorTable) {
  std::istringstream is(std::string(kProfileHeader) + "\n");
  auto store = load_profiles(is, default_knob_space());
  EXPECT_TRUE(store.operators().empty());
}

TEST(Profiles, CsvErrors) {
  const auto k = default_knob_space();
  auto expect_code = [&](const std::string& body, ErrorCode code,
                         const std::string& needle) {
    std::istringstream is(std::string(kProfileHeader) + "\n" + body);
    try {
      load_profiles(is, k);
      ADD_FAILURE() << "no error for " << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code);
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_code("operator,a,1,4k,100%,best,,,1,1,,,\n", ErrorCode::DomainMismatch,
              "resolution");
  expect_code("operator,a,1,1080p,100%,best,,,x,1,,,\n", ErrorCode::ParseError,
              "line 2");
  expect_code("operator,a,1,1080p\n", ErrorCode::ParseError, "line 2");
  expect_code("coding,,1,1080p,100%,best,warp,5,,,1,1,1\n",
              ErrorCode::DomainMismatch, "speed_step");
  std::istringstream bad_header("a,b,c\n");
  EXPECT_THROW(load_profiles(bad_header, k), Error);
}

TEST(Profiles, CsvMonotonicityWarnings) {
  const auto k = default_knob_space();
  std::istringstream is(std::string(kProfileHeader) + "\n" +
                        "operator,a,1,720p,100%,best,,,0.9,2,,,\n"
                        "operator,a,1,1080p,100%,best,,,0.8,3,,,\n");
  auto store = load_profiles(is, k);
  EXPECT_EQ(store.warnings().size(), 2u);
}
