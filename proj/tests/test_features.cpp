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
#include <complex>
#include <numbers>

#include "doctest.h"
#include "matchbox/error.h"
#include "matchbox/features.h"
#include "test_util.h"

using namespace matchbox;
using matchbox::testing::gaussian_clip;
using matchbox::testing::tone;

TEST_CASE("frame count") {
  const FeatureConfig cfg;
  CHECK(frame_count(16000, cfg, 16000) == 98);  // floor((16000 - 400) / 160) + 1
  CHECK(frame_count(400, cfg, 16000) == 1);
  CHECK(frame_count(559, cfg, 16000) == 1);
  CHECK(frame_count(560, cfg, 16000) == 2);
  CHECK_THROWS_AS(frame_count(399, cfg, 16000), Error);
  try {
    frame_count(399, cfg, 16000);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClipTooShort);
  }
}

TEST_CASE("one second clip yields 98 frames padded 15/15") {
  const auto fm = mfcc(gaussian_clip(1));
  CHECK(fm.values.rows() == 64);
  CHECK(fm.values.cols() == 128);
  CHECK(fm.valid_frames == 98);
  CHECK(fm.pad_left == 15);
  CHECK(fm.values.leftCols(15).isZero(0.0));
  CHECK(fm.values.rightCols(15).isZero(0.0));
  CHECK(fm.values.col(15).cwiseAbs().maxCoeff() > 0.0);
  CHECK(fm.values.col(112).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("silence gives identical constant frames") {
  AudioClip clip;
  clip.samples = Eigen::VectorXf::Zero(16000);
  const FeatureConfig cfg;
  const auto fm = mfcc(clip, cfg);
  // Orthonormal DCT-II of c * ones(64) is (8c, 0, ..., 0).
  const double c = std::log(cfg.log_floor);
  for (int t = fm.pad_left; t < fm.pad_left + fm.valid_frames; ++t) {
    CHECK(fm.values(0, t) == doctest::Approx(8.0 * c).epsilon(1e-12));
    CHECK(fm.values.col(t).tail(63).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(fm.values.col(t) == fm.values.col(fm.pad_left));
  }
}

TEST_CASE("1 kHz tone peaks in the filter centred nearest mel(1000)") {
  const FeatureConfig cfg;
  const MfccExtractor ex(cfg);
  const Eigen::VectorXd energy = ex.mel_energies(tone(1000.0)).rowwise().mean();
  Eigen::Index peak = 0;
  energy.maxCoeff(&peak);

  // Oracle: filter centres are evenly spaced on the mel axis from 0 to
  // mel(8000) with 66 edges.
  const double target = 2595.0 * std::log10(1.0 + 1000.0 / 700.0);
  const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  int nearest = -1;
  double best = 1e300;
  for (int m = 0; m < 64; ++m) {
    const double centre = top * (m + 1) / 65.0;
    if (std::abs(centre - target) < best) {
      best = std::abs(centre - target);
      nearest = m;
    }
  }
  CHECK(nearest == 22);  // centre at 23 * mel(8000) / 65 ~ 1004.9 mel
  CHECK(peak == nearest);
}

TEST_CASE("power spectrum matches a direct DFT") {
  const FeatureConfig cfg;
  const MfccExtractor ex(cfg);
  const AudioClip clip = gaussian_clip(7, 0.2, 1200);
  const Eigen::MatrixXd power = ex.power_spectrogram(clip);
  REQUIRE(power.cols() == frame_count(1200, cfg, 16000));
  for (int t : {0, 3, 5}) {
    for (int k : {0, 1, 17, 128, 255, 256}) {
      std::complex<double> acc = 0.0;
      for (int n = 0; n < 400; ++n) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / 400.0);
        const double x = clip.samples[t * 160 + n] * w;
        acc += x * std::polar(1.0, -2.0 * std::numbers::pi * k * n / 512.0);
      }
      CHECK(power(k, t) == doctest::Approx(std::norm(acc)).epsilon(1e-9));
    }
  }
}

TEST_CASE("filterbank triangles are non-empty and peak near one") {
  const FeatureConfig cfg;
  const Eigen::MatrixXd fb = mel_filterbank(cfg, 16000);
  CHECK(fb.rows() == 64);
  CHECK(fb.cols() == 257);
  CHECK(fb.minCoeff() >= 0.0);
  for (int m = 0; m < 64; ++m) {
    CHECK(fb.row(m).maxCoeff() > 0.3);
    CHECK(fb.row(m).maxCoeff() <= 1.0);
  }
  CHECK(hz_to_mel(mel_to_hz(1234.5)) == doctest::Approx(1234.5));
}

TEST_CASE("inverse DCT recovers log-mel values") {
  const MfccExtractor ex;
  const AudioClip clip = gaussian_clip(3);
  const auto fm = ex(clip);
  const Eigen::MatrixXd log_mel = ex.log_mel(clip);
  const Eigen::MatrixXd recovered = ex.dct().transpose() * fm.values.middleCols(fm.pad_left, fm.valid_frames);
  const double rel = (recovered - log_mel).cwiseAbs().maxCoeff() / log_mel.cwiseAbs().maxCoeff();
  CHECK(rel < 1e-6);
  CHECK((ex.dct() * ex.dct().transpose() - Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shifting by one hop shifts frames by one column") {
  const AudioClip clip = gaussian_clip(11);
  AudioClip shifted = clip;
  shifted.samples.setZero();
  shifted.samples.tail(16000 - 160) = clip.samples.head(16000 - 160);
  const auto a = mfcc(clip);
  const auto b = mfcc(shifted);
  REQUIRE(a.valid_frames == b.valid_frames);
  for (int t = 0; t + 1 < a.valid_frames - 1; ++t) {
    const auto ca = a.values.col(a.pad_left + t);
    const auto cb = b.values.col(b.pad_left + t + 1);
    CHECK((ca - cb).cwiseAbs().maxCoeff() <= 1e-6 * ca.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("shape is 64x128 for any duration after fitting") {
  for (Eigen::Index n : {400, 8000, 15800, 16000, 17000, 48000}) {
    const auto fm = mfcc(fit_to_duration(gaussian_clip(n, 0.1, n), 1.0));
    CHECK(fm.values.rows() == 64);
    CHECK(fm.values.cols() == 128);
    CHECK(fm.valid_frames == 98);
  }
  // Without fitting, long clips keep their central 128 frames.
  const auto long_fm = mfcc(gaussian_clip(5, 0.1, 48000));
  CHECK(long_fm.valid_frames == 128);
  CHECK(long_fm.pad_left == 0);
}

TEST_CASE("feature dump round trip") {
  const auto fm = mfcc(gaussian_clip(2));
  const auto bytes = dump_feature_map(fm);
  CHECK(bytes.size() == 12 + 4 * 64 * 128);
  const auto back = load_feature_map_dump(bytes);
  CHECK(back.valid_frames == 98);
  CHECK(back.pad_left == 15);
  CHECK((back.values - fm.values).cwiseAbs().maxCoeff() <= 1e-5 * fm.values.cwiseAbs().maxCoeff());
}

TEST_CASE("invalid feature configs are rejected") {
  FeatureConfig cfg;
  cfg.n_coeffs = 65;
  CHECK_THROWS_AS(cfg.validate(16000), Error);
  cfg = {};
  cfg.n_fft = 256;
  CHECK_THROWS_AS(cfg.validate(16000), Error);
  cfg = {};
  cfg.f_max_hz = 9000;
  CHECK_THROWS_AS(MfccExtractor(cfg, 16000), Error);
}
