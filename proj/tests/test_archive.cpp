#include <gtest/gtest.h>

#include <filesystem>

#include "icaclf/archive.hpp"
#include "icaclf/error.hpp"

using namespace icaclf;

namespace {

Archive sample() {
  Archive a;
  a.tensors.push_back({"layer.weight", Tensor({2, 3}, std::vector<real>{1, 2, 3, 4, 5, -6.5f})});
  a.tensors.push_back({"layer.bias", Tensor({2}, std::vector<real>{0.25f, -0.125f})});
  a.metadata["note"] = "x";
  return a;
}

}  // namespace

TEST(Archive, RoundTrip) {
  const auto bytes = serialize_archive(sample());
  EXPECT_EQ(bytes.substr(0, 8), "ICAPARAM");
  const Archive back = parse_archive(bytes);
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.tensors[0].name, "layer.weight");
  EXPECT_EQ(back.at("layer.weight").shape(), (Shape{2, 3}));
  EXPECT_EQ(back.at("layer.weight").data()[5], real(-6.5));
  EXPECT_EQ(back.at("layer.bias").data()[1], real(-0.125));
  EXPECT_EQ(back.metadata.at("note"), "x");
  EXPECT_EQ(serialize_archive(back), bytes);
}

TEST(Archive, RejectsCorruption) {
  auto bytes = serialize_archive(sample());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(parse_archive(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(parse_archive(bad_version), VersionError);
  EXPECT_THROW(parse_archive(bytes.substr(0, bytes.size() - 3)), TruncationError);
  EXPECT_THROW(sample().at("missing"), Error);
}

TEST(Archive, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "icaclf_archive_test";
  std::filesystem::remove_all(dir);
  write_archive(dir / "nested" / "a.icap", sample());
  const Archive back = read_archive(dir / "nested" / "a.icap");
  EXPECT_EQ(back.at("layer.bias").data()[0], real(0.25));
  EXPECT_THROW(read_archive(dir / "nope.icap"), IoError);
  std::filesystem::remove_all(dir);
}
