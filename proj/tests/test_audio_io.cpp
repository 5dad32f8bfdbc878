// Copyright 2026 The Matchbox Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include "doctest.h"
#include "matchbox/audio_io.h"
#include "matchbox/error.h"
#include "test_util.h"

using namespace matchbox;
using matchbox::testing::reference_wav;

namespace {

ErrorCode decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_wav(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode_wav accepted invalid input");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("decode scales int16 by 1/32768") {
  const auto clip = decode_wav(reference_wav({32767, 0, -32768, 1}));
  REQUIRE(clip.samples.size() == 4);
  CHECK(clip.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-9));
  CHECK(clip.samples[1] == 0.0f);
  CHECK(clip.samples[2] == -1.0f);
  CHECK(clip.samples[3] == doctest::Approx(1.0 / 32768.0));
  CHECK(clip.sample_rate_hz == 16000);
}

TEST_CASE("one second at 16 kHz decodes to 16000 samples") {
  std::vector<std::int16_t> pcm(16000);
  for (std::size_t i = 0; i < pcm.size(); ++i) pcm[i] = static_cast<std::int16_t>((i * 37) % 2000 - 1000);
  const auto clip = decode_wav(reference_wav(pcm));
  CHECK(clip.samples.size() == 16000);
  CHECK(clip.duration_seconds() == doctest::Approx(1.0));
  CHECK(clip.samples[5] == doctest::Approx(static_cast<double>(pcm[5]) / 32768.0));
}

TEST_CASE("encode of silence has a 32000-byte zero data chunk") {
  AudioClip clip;
  clip.samples = Eigen::VectorXf::Zero(16000);
  const auto bytes = encode_wav(clip);
  REQUIRE(bytes.size() == 44 + 32000);
  CHECK(std::string(bytes.begin() + 36, bytes.begin() + 40) == "data");
  const std::uint32_t declared = bytes[40] | (bytes[41] << 8) | (bytes[42] << 16) | (bytes[43] << 24);
  CHECK(declared == 32000);
  CHECK(std::all_of(bytes.begin() + 44, bytes.end(), [](std::uint8_t b) { return b == 0; }));
  // Same bytes as the independent reference writer.
  CHECK(bytes == reference_wav(std::vector<std::int16_t>(16000, 0)));
}

TEST_CASE("full-scale amplitudes saturate") {
  AudioClip clip;
  clip.samples = Eigen::VectorXf(3);
  clip.samples << 1.0f, -1.0f, 0.5f;
  const auto back = decode_wav(encode_wav(clip));
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == -1.0f);
  CHECK(back.samples[2] == 0.5f);
  const auto bytes = encode_wav(clip);
  CHECK(bytes[44] == 0xff);
  CHECK(bytes[45] == 0x7f);
}

TEST_CASE("round trip stays within one quantization step") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    AudioClip clip;
    clip.samples.resize(1000 + static_cast<Eigen::Index>(seed) * 17);
    for (auto& s : clip.samples) s = u(rng);
    clip.sample_rate_hz = seed % 2 ? 16000 : 8000;
    const auto back = decode_wav(encode_wav(clip));
    REQUIRE(back.samples.size() == clip.samples.size());
    CHECK(back.sample_rate_hz == clip.sample_rate_hz);
    CHECK((back.samples - clip.samples).cwiseAbs().maxCoeff() <= 1.0f / 32768.0f);
  }
}

TEST_CASE("malformed containers are rejected") {
  CHECK(decode_error({'R', 'I', 'F'}) == ErrorCode::MalformedHeader);
  auto bytes = reference_wav({1, 2, 3});
  bytes[0] = 'X';
  CHECK(decode_error(bytes) == ErrorCode::MalformedHeader);
  bytes = reference_wav({1, 2, 3});
  bytes[8] = 'A';
  CHECK(decode_error(bytes) == ErrorCode::MalformedHeader);
}

TEST_CASE("non PCM16 mono encodings are rejected") {
  CHECK(decode_error(reference_wav({1, 2}, 16000, 2)) == ErrorCode::UnsupportedEncoding);
  CHECK(decode_error(reference_wav({1, 2}, 16000, 1, 8)) == ErrorCode::UnsupportedEncoding);
  CHECK(decode_error(reference_wav({1, 2}, 16000, 1, 16, 3)) == ErrorCode::UnsupportedEncoding);
}

TEST_CASE("declared data longer than payload is truncation") {
  CHECK(decode_error(reference_wav({1, 2, 3}, 16000, 1, 16, 1, 600)) == ErrorCode::TruncatedData);
  auto bytes = reference_wav({1, 2, 3, 4});
  bytes.resize(bytes.size() - 3);
  CHECK(decode_error(bytes) == ErrorCode::TruncatedData);
}

TEST_CASE("unknown chunks before data are skipped") {
  auto bytes = reference_wav({100, -100});
  const std::vector<std::uint8_t> list = {'L', 'I', 'S', 'T', 3, 0, 0, 0, 'a', 'b', 'c', 0};
  bytes.insert(bytes.begin() + 36, list.begin(), list.end());
  const auto clip = decode_wav(bytes);
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == doctest::Approx(100.0 / 32768.0));
}

TEST_CASE("probe_wav reads the header only") {
  matchbox::testing::TempDir dir;
  const auto path = dir.path() / "a.wav";
  const auto bytes = reference_wav(std::vector<std::int16_t>(12345, 7), 16000);
  write_file(path, bytes);
  const auto info = probe_wav(path);
  CHECK(info.sample_rate_hz == 16000);
  CHECK(info.num_samples == 12345);
  auto stereo = reference_wav({1, 2}, 16000, 2);
  write_file(path, stereo);
  CHECK_THROWS_AS(probe_wav(path), Error);
}

TEST_CASE("fit_to_duration pads symmetrically and center crops") {
  AudioClip clip;
  clip.samples = Eigen::VectorXf::Ones(15800);
  auto out = fit_to_duration(clip, 1.0);
  REQUIRE(out.samples.size() == 16000);
  CHECK(out.samples.head(100).isZero());
  CHECK(out.samples.tail(100).isZero());
  CHECK(out.samples.segment(100, 15800).isOnes());

  clip.samples = Eigen::VectorXf::LinSpaced(16000, 0, 15999);
  CHECK(fit_to_duration(clip, 1.0).samples == clip.samples);

  clip.samples = Eigen::VectorXf::LinSpaced(17000, 0, 16999);
  out = fit_to_duration(clip, 1.0);
  REQUIRE(out.samples.size() == 16000);
  CHECK(out.samples[0] == 500.0f);
  CHECK(out.samples[15999] == 16499.0f);

  // Odd deficit: extra zero on the right.
  clip.samples = Eigen::VectorXf::Ones(15999);
  out = fit_to_duration(clip, 1.0);
  CHECK(out.samples[0] == 1.0f);
  CHECK(out.samples[15999] == 0.0f);
}

TEST_CASE("fit_to_duration is idempotent") {
  for (Eigen::Index n : {1, 399, 15800, 15999, 16000, 16001, 17000, 40000}) {
    AudioClip clip;
    clip.samples = Eigen::VectorXf::Random(n);
    const auto once = fit_to_duration(clip, 1.0);
    CHECK(fit_to_duration(once, 1.0).samples == once.samples);
    CHECK(fit_to_duration(clip, 0.5).samples.size() == 8000);
  }
}
