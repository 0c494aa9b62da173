#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace meerkit::audio {

/// Mono waveform with its sample rate and the call id it belongs to.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate_hz = 0;
    std::string call_id;

    double duration_ms() const {
        return sample_rate_hz > 0 ? 1000.0 * static_cast<double>(samples.size()) / sample_rate_hz
                                  : 0.0;
    }
};

/// Throws data_error unless the clip is non-empty, has a positive rate and
/// every sample is finite and within [-1, 1].
void validate(const AudioClip& clip);

/// Reads a RIFF/WAVE file holding PCM16 or IEEE float32 samples. Channels
/// are averaged to mono; PCM16 is scaled by 1/32768, float32 is clamped.
AudioClip load_wav(const std::filesystem::path& path);

enum class WavEncoding { Pcm16, Float32 };

/// Writes a mono clip. PCM16 output rounds and saturates.
void save_wav(const AudioClip& clip, const std::filesystem::path& path,
              WavEncoding encoding = WavEncoding::Float32);

/// Writes interleaved multi-channel data (frames x channels), used by tests
/// and fixture generators.
void save_wav_interleaved(const std::vector<double>& interleaved, int channels, int sample_rate_hz,
                          const std::filesystem::path& path, WavEncoding encoding);

/// Band-limited sample-rate conversion (Kaiser-windowed sinc, polyphase).
/// Output length is round(n * target / source). Same-rate input is returned
/// unchanged.
AudioClip resample(const AudioClip& clip, int target_rate_hz);

/// Sample count corresponding to min_ms at the given rate, rounded up.
std::size_t min_samples_for(double min_ms, int sample_rate_hz);

/// Tiles whole copies of the waveform until it reaches min_ms. Clips that
/// are already long enough are returned unchanged.
AudioClip enforce_min_duration(const AudioClip& clip, double min_ms = 100.0);

/// Number of whole copies enforce_min_duration produces (1 when unchanged).
std::size_t replication_factor(std::size_t length, double min_ms, int sample_rate_hz);

struct ManifestEntry {
    std::string call_id;
    std::string path;
    std::string label;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    /// Distinct labels, sorted lexicographically. Class index = position here.
    std::vector<std::string> label_set;
    /// Directory relative entry paths are resolved against.
    std::filesystem::path base_dir;

    std::size_t class_index(const std::string& label) const;
    std::filesystem::path resolve(const ManifestEntry& entry) const;
};

/// Parses the `call_id,path,label` manifest CSV.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Builds a manifest from in-memory entries, enforcing the same invariants.
DatasetManifest make_manifest(std::vector<ManifestEntry> entries,
                              std::filesystem::path base_dir = {});

}  // namespace meerkit::audio
