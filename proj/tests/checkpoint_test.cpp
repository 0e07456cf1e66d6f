#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "hca_marl/checkpoint.hpp"

using namespace hca_marl;

namespace {

std::vector<CheckpointRecord> sample_records() {
  std::mt19937_64 rng(42);
  GaussianPolicyHead g(Mlp({8, 6, 3}, Activation::tanh, rng), -0.5);
  CategoricalPolicyHead c(Mlp({5, 4, 6}, Activation::relu, rng));
  return {actor_record("racket/actor", g), actor_record("striker/actor", c),
          {"racket/critic", NetworkKind::value, Mlp({8, 6, 1}, Activation::identity, rng), {}}};
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  const auto records = sample_records();
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(records)), records);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "hca_marl_checkpoint_test.hcac";
  const auto records = sample_records();
  save_checkpoint(path, records);
  EXPECT_EQ(load_checkpoint(path), records);
  std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderLayout) {
  const std::string bytes = encode_checkpoint(sample_records());
  EXPECT_EQ(bytes.substr(0, 4), "HCAC");
  std::uint32_t version = 0, count = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&count, bytes.data() + 8, 4);
  EXPECT_EQ(version, 1u);
  EXPECT_EQ(count, 3u);
}

TEST(Checkpoint, ActorRecordRestoresHead) {
  const auto records = sample_records();
  const PolicyHead g = head_from_record(records[0]);
  ASSERT_TRUE(std::holds_alternative<GaussianPolicyHead>(g));
  EXPECT_EQ(std::get<GaussianPolicyHead>(g).log_std, Vector::Constant(3, -0.5));
  EXPECT_TRUE(std::holds_alternative<CategoricalPolicyHead>(head_from_record(records[1])));
  EXPECT_THROW(head_from_record(records[2]), CheckpointError);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const std::string good = encode_checkpoint(sample_records());
  EXPECT_THROW(decode_checkpoint("XXXX" + good.substr(4)), CheckpointError);
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 3)), CheckpointError);
  EXPECT_THROW(decode_checkpoint(good + "x"), CheckpointError);
  std::string bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), CheckpointError);
  EXPECT_THROW(decode_checkpoint(""), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.hcac"), CheckpointError);
}

TEST(Checkpoint, RejectsNonFiniteParameters) {
  auto records = sample_records();
  records[2].net.biases()[0][0] = std::nan("");
  EXPECT_THROW(decode_checkpoint(encode_checkpoint(records)), CheckpointError);
}
