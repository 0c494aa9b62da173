#include "meerkit/audio.hpp"
#include "meerkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace meerkit::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct FormatChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits = 0;
};

}  // namespace

void validate(const AudioClip& clip) {
    if (clip.samples.empty()) throw data_error("clip '" + clip.call_id + "' has no samples");
    if (clip.sample_rate_hz <= 0) throw data_error("clip '" + clip.call_id + "' has no sample rate");
    for (double s : clip.samples) {
        if (!std::isfinite(s) || s < -1.0 || s > 1.0)
            throw data_error("clip '" + clip.call_id + "' has a sample outside [-1, 1]");
    }
}

AudioClip load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open WAV file " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>());
    const std::string where = " (" + path.string() + ")";
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw data_error("not a RIFF/WAVE file" + where);

    FormatChunk fmt;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* header = bytes.data() + pos;
        const std::uint32_t declared = read_u32(header + 4);
        const std::size_t body = pos + 8;
        const std::size_t available = bytes.size() - body;
        const std::size_t size = std::min<std::size_t>(declared, available);
        if (std::memcmp(header, "fmt ", 4) == 0) {
            if (size < 16) throw data_error("truncated fmt chunk" + where);
            const unsigned char* f = bytes.data() + body;
            fmt.format = read_u16(f);
            fmt.channels = read_u16(f + 2);
            fmt.sample_rate = read_u32(f + 4);
            fmt.block_align = read_u16(f + 12);
            fmt.bits = read_u16(f + 14);
            if (fmt.format == kFormatExtensible) {
                if (size < 40) throw data_error("truncated extensible fmt chunk" + where);
                // The sub-format GUID starts with the plain format code.
                fmt.format = read_u16(f + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(header, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = size;
            have_data = true;
        }
        pos = body + size + (size & 1);
    }

    if (!have_fmt) throw data_error("missing fmt chunk" + where);
    if (!have_data) throw data_error("missing data chunk" + where);
    const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
    const bool float32 = fmt.format == kFormatFloat && fmt.bits == 32;
    if (!pcm16 && !float32)
        throw data_error("unsupported WAV encoding (format " + std::to_string(fmt.format) + ", " +
                         std::to_string(fmt.bits) + " bits); only PCM16 and float32 are accepted" +
                         where);
    if (fmt.channels == 0 || fmt.sample_rate == 0) throw data_error("invalid fmt chunk" + where);
    const std::size_t bytes_per_sample = fmt.bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
    if (fmt.block_align != 0 && fmt.block_align != frame_bytes)
        throw data_error("block align does not match channel layout" + where);
    const std::size_t frames = data_size / frame_bytes;
    if (frames == 0) throw data_error("empty data chunk" + where);

    AudioClip clip;
    clip.sample_rate_hz = static_cast<int>(fmt.sample_rate);
    clip.call_id = path.stem().string();
    clip.samples.resize(frames);
    const double inv_channels = 1.0 / fmt.channels;
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < fmt.channels; ++c) {
            const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
            if (pcm16) {
                acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
            } else {
                const std::uint32_t bits = read_u32(p);
                float v;
                std::memcpy(&v, &bits, sizeof v);
                double d = v;
                if (!std::isfinite(d)) throw data_error("non-finite float sample" + where);
                acc += std::clamp(d, -1.0, 1.0);
            }
        }
        clip.samples[i] = acc * inv_channels;
    }
    return clip;
}

void save_wav_interleaved(const std::vector<double>& interleaved, int channels, int sample_rate_hz,
                          const std::filesystem::path& path, WavEncoding encoding) {
    if (channels <= 0 || sample_rate_hz <= 0) throw invalid_argument("invalid WAV layout");
    const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
    const std::uint16_t format = encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat;
    const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));

    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, format);
    put_u16(out, static_cast<std::uint16_t>(channels));
    put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
    put_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * block_align);
    put_u16(out, block_align);
    put_u16(out, bits);
    out += "data";
    put_u32(out, data_bytes);
    for (double s : interleaved) {
        if (encoding == WavEncoding::Pcm16) {
            const double scaled = std::round(s * 32768.0);
            const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
            put_u16(out, static_cast<std::uint16_t>(v));
        } else {
            const float v = static_cast<float>(s);
            std::uint32_t u;
            std::memcpy(&u, &v, sizeof u);
            put_u32(out, u);
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot write WAV file " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw io_error("failed writing WAV file " + path.string());
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path, WavEncoding encoding) {
    save_wav_interleaved(clip.samples, 1, clip.sample_rate_hz, path, encoding);
}

}  // namespace meerkit::audio
