#include <gtest/gtest.h>

#include <random>

#include "bikeflow/digest.hpp"
#include "bikeflow/raster.hpp"
#include "support.hpp"

using namespace bikeflow;

TEST(Raster, PngRoundTripIsLossless) {
    std::mt19937_64 rng(3);
    const Image img = testkit::random_image(37, 21, rng);
    EXPECT_EQ(decode_image(encode_png(img)), img);
    Mask m(5, 4);
    m.set(1, 2, true);
    m.set(4, 3, true);
    EXPECT_EQ(decode_mask(encode_png(m)), m);
    EXPECT_EQ(m.count(), 2u);
}

TEST(Raster, ContentHashIgnoresContainer) {
    Image a(4, 4, {1, 2, 3});
    EXPECT_EQ(content_hash(a), content_hash(decode_image(encode_png(a))));
    Image b(4, 4, {1, 2, 4});
    EXPECT_NE(content_hash(a), content_hash(b));
    EXPECT_NE(content_hash(Image(2, 8, {1, 2, 3})), content_hash(a));
}

TEST(Raster, FillRectClips) {
    Image img(4, 4);
    img.fill_rect(-2, -2, 2, 2, {9, 9, 9});
    EXPECT_EQ(img.at(0, 0), (Rgb{9, 9, 9}));
    EXPECT_EQ(img.at(1, 1), (Rgb{9, 9, 9}));
    EXPECT_EQ(img.at(2, 2), (Rgb{0, 0, 0}));
}

TEST(Raster, DecodeRejectsGarbage) {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4};
    EXPECT_THROW((void)decode_image(junk), Error);
}

TEST(Digest, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const std::string text = "hello bike lanes";
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    EXPECT_EQ(base64_encode(bytes), "aGVsbG8gYmlrZSBsYW5lcw==");
    EXPECT_EQ(base64_decode("aGVsbG8gYmlrZSBsYW5lcw=="), bytes);
}
