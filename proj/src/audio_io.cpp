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

#include "matchbox/audio_io.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "matchbox/error.h"

namespace matchbox {

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    fail(ErrorCode::MalformedHeader, "not a RIFF/WAVE container");

  bool have_fmt = false;
  int rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_is(bytes, pos, "fmt ")) {
      if (chunk_size < 16 || body + 16 > bytes.size())
        fail(ErrorCode::MalformedHeader, "fmt chunk too short");
      const std::uint16_t format = read_u16(bytes, body);
      const std::uint16_t channels = read_u16(bytes, body + 2);
      const std::uint32_t sample_rate = read_u32(bytes, body + 4);
      const std::uint16_t bits = read_u16(bytes, body + 14);
      // 0xFFFE is WAVE_FORMAT_EXTENSIBLE; its subformat must still be PCM.
      const bool pcm = format == 1 ||
                       (format == 0xFFFE && chunk_size >= 40 &&
                        body + 26 <= bytes.size() && read_u16(bytes, body + 24) == 1);
      if (!pcm || channels != 1 || bits != 16)
        fail(ErrorCode::UnsupportedEncoding,
             "only 16-bit PCM mono is supported (format " + std::to_string(format) +
                 ", channels " + std::to_string(channels) + ", bits " +
                 std::to_string(bits) + ")");
      if (sample_rate == 0) fail(ErrorCode::MalformedHeader, "sample rate is zero");
      rate = static_cast<int>(sample_rate);
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) fail(ErrorCode::MalformedHeader, "data chunk before fmt chunk");
      if (body + chunk_size > bytes.size())
        fail(ErrorCode::TruncatedData,
             "data chunk declares " + std::to_string(chunk_size) + " bytes, " +
                 std::to_string(bytes.size() - body) + " present");
      AudioClip clip;
      clip.sample_rate_hz = rate;
      const std::size_t n = chunk_size / 2;
      clip.samples.resize(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
        clip.samples[static_cast<Eigen::Index>(i)] = static_cast<float>(raw) / 32768.0f;
      }
      return clip;
    }
    // chunks are word aligned
    pos = body + chunk_size + (chunk_size & 1u);
  }
  fail(have_fmt ? ErrorCode::TruncatedData : ErrorCode::MalformedHeader,
       have_fmt ? "missing data chunk" : "missing fmt chunk");
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = 2 * n;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (Eigen::Index i = 0; i < clip.samples.size(); ++i) {
    const double scaled = std::round(static_cast<double>(clip.samples[i]) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

WavInfo probe_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  const auto file_size = static_cast<std::uint64_t>(std::filesystem::file_size(path));
  auto read_bytes = [&in](std::size_t n) {
    std::vector<std::uint8_t> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    buf.resize(static_cast<std::size_t>(in.gcount()));
    return buf;
  };
  std::vector<std::uint8_t> head = read_bytes(12);
  if (head.size() < 12 || !tag_is(head, 0, "RIFF") || !tag_is(head, 8, "WAVE"))
    fail(ErrorCode::MalformedHeader, path.string() + ": not a RIFF/WAVE container");
  std::uint64_t pos = 12;
  bool have_fmt = false;
  WavInfo info;
  while (true) {
    auto chunk = read_bytes(8);
    if (chunk.size() < 8)
      fail(have_fmt ? ErrorCode::TruncatedData : ErrorCode::MalformedHeader,
           path.string() + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
    const std::uint32_t size = read_u32(chunk, 4);
    if (tag_is(chunk, 0, "fmt ")) {
      // Validate fmt by decoding a header-only copy with an empty data chunk.
      auto body = read_bytes(size);
      std::vector<std::uint8_t> fake = head;
      fake.insert(fake.end(), chunk.begin(), chunk.end());
      fake.insert(fake.end(), body.begin(), body.end());
      const char data_hdr[8] = {'d', 'a', 't', 'a', 0, 0, 0, 0};
      fake.insert(fake.end(), data_hdr, data_hdr + 8);
      try {
        info.sample_rate_hz = decode_wav(fake).sample_rate_hz;
      } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
      }
      have_fmt = true;
      if (size & 1u) in.seekg(1, std::ios::cur);
    } else if (tag_is(chunk, 0, "data")) {
      if (!have_fmt) fail(ErrorCode::MalformedHeader, path.string() + ": data chunk before fmt chunk");
      if (pos + 8 + size > file_size)
        fail(ErrorCode::TruncatedData, path.string() + ": data chunk exceeds file size");
      info.num_samples = size / 2;
      return info;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
    pos += 8 + size + (size & 1u);
  }
}

AudioClip read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    AudioClip clip = decode_wav(bytes);
    clip.source_id = path.string();
    return clip;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  write_file(path, encode_wav(clip));
}

AudioClip fit_to_duration(const AudioClip& clip, double seconds) {
  if (!(seconds > 0)) fail(ErrorCode::BadArgument, "duration must be positive");
  const auto target = static_cast<Eigen::Index>(std::llround(seconds * clip.sample_rate_hz));
  const Eigen::Index n = clip.samples.size();
  AudioClip out = clip;
  if (n == target) return out;
  out.samples = Eigen::VectorXf::Zero(target);
  if (n < target) {
    const Eigen::Index left = (target - n) / 2;
    out.samples.segment(left, n) = clip.samples;
  } else {
    const Eigen::Index start = (n - target) / 2;
    out.samples = clip.samples.segment(start, target);
  }
  return out;
}

}  // namespace matchbox
