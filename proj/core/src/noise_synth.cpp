#include "endonoise/noise_synth.hpp"

#include "endonoise/error.hpp"
#include "endonoise/random.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace endonoise {

void PbnParams::validate() const
{
    if (period < 2 || period % 2 != 0)
        fail(ErrorKind::Argument, "PBN period must be even and >= 2");
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
        fail(ErrorKind::Argument, "PBN amplitude must be >= 0");
    if (phase < 0 || phase >= period)
        fail(ErrorKind::Argument, "PBN phase must lie in [0, period)");
}

std::vector<double> pbn_pattern(int width, const PbnParams& pbn)
{
    pbn.validate();
    if (width <= 0)
        fail(ErrorKind::Argument, "pattern width must be positive");
    std::vector<double> out(static_cast<std::size_t>(width));
    for (int x = 0; x < width; ++x)
        out[x] = pbn.kappa * pbn_sign(x, pbn.period, pbn.phase);
    return out;
}

void NoiseModelParams::validate() const
{
    if (!(shot_gain_a >= 0.0) || !std::isfinite(shot_gain_a))
        fail(ErrorKind::Argument, "shot_gain_a must be >= 0 (0 disables shot noise)");
    if (!(read_sigma >= 0.0) || !std::isfinite(read_sigma))
        fail(ErrorKind::Argument, "read_sigma must be >= 0");
    if (!(quant_step >= 0.0) || !std::isfinite(quant_step))
        fail(ErrorKind::Argument, "quant_step must be >= 0");
    if (pbn)
        pbn->validate();
}

nlohmann::json to_json(const NoiseModelParams& params)
{
    nlohmann::json doc = {
        {"shot_gain_a", params.shot_gain_a},
        {"read_sigma", params.read_sigma},
        {"quant_step", params.quant_step},
        {"seed", params.seed},
    };
    if (params.pbn)
        doc["pbn"] = {{"kappa", params.pbn->kappa}, {"period", params.pbn->period}, {"phase", params.pbn->phase}};
    if (params.fpn_path)
        doc["fpn_path"] = *params.fpn_path;
    return doc;
}

NoiseModelParams noise_params_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir)
{
    if (!doc.is_object())
        fail(ErrorKind::Format, "noise parameters must be a JSON object");
    NoiseModelParams p;
    try {
        p.shot_gain_a = doc.value("shot_gain_a", p.shot_gain_a);
        p.read_sigma = doc.value("read_sigma", p.read_sigma);
        p.quant_step = doc.value("quant_step", p.quant_step);
        p.seed = doc.value("seed", p.seed);
        if (doc.contains("pbn") && !doc["pbn"].is_null()) {
            const auto& j = doc["pbn"];
            PbnParams pbn;
            pbn.kappa = j.value("kappa", 0.0);
            pbn.period = j.value("period", 4);
            pbn.phase = j.value("phase", 0);
            p.pbn = pbn;
        }
        if (doc.contains("fpn_path") && !doc["fpn_path"].is_null()) {
            p.fpn_path = doc["fpn_path"].get<std::string>();
            std::filesystem::path fp = *p.fpn_path;
            if (fp.is_relative() && !base_dir.empty())
                fp = base_dir / fp;
            p.fpn = std::make_shared<const FpnMap>(load_fpn(fp));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed noise parameters: ") + e.what());
    }
    p.validate();
    return p;
}

RawFrame synthesize_noise(const FloatFrame& clean, const NoiseModelParams& params, const CaptureMeta& meta)
{
    params.validate();
    for (double v : clean.samples())
        if (v < 0.0)
            fail(ErrorKind::Argument, "clean frame contains negative values");
    if (params.fpn && (params.fpn->width() != clean.width() || params.fpn->height() != clean.height()))
        fail(ErrorKind::Argument, "FPN map shape does not match the clean frame");
    if (!is_supported_bit_depth(meta.bit_depth))
        fail(ErrorKind::Argument, "unsupported bit depth");

    const int width = clean.width();
    const int height = clean.height();
    const double full_scale = static_cast<double>((1u << meta.bit_depth) - 1u);
    const double exposure = meta.analog_gain * meta.exposure_time_ms;
    const std::vector<double> banding =
        params.pbn ? pbn_pattern(width, *params.pbn) : std::vector<double>(width, 0.0);

    std::vector<std::uint16_t> out(clean.size());
    auto in = clean.samples();

    detail::parallel_for(static_cast<std::size_t>(height), [&](std::size_t y) {
        using Poisson = std::poisson_distribution<long long>;
        Poisson::param_type shot_param(1.0);
        double cached_mean = -1.0;

        for (int x = 0; x < width; ++x) {
            const std::size_t i = y * static_cast<std::size_t>(width) + x;
            CounterRng rng(params.seed, meta.frame_index, i);

            double v = in[i];
            if (params.shot_gain_a > 0.0 && v > 0.0) {
                const double mean = v / params.shot_gain_a;
                if (mean != cached_mean) {
                    shot_param = Poisson::param_type(mean);
                    cached_mean = mean;
                }
                Poisson shot(shot_param);
                v = params.shot_gain_a * static_cast<double>(shot(rng));
            }
            if (params.read_sigma > 0.0) {
                std::normal_distribution<double> read(0.0, params.read_sigma);
                v += read(rng);
            }
            if (params.quant_step > 0.0)
                v += (rng.uniform() - 0.5) * params.quant_step;
            if (params.fpn)
                v += static_cast<double>(params.fpn->slope()[i]) * exposure +
                     static_cast<double>(params.fpn->offset()[i]);
            v += banding[x] + meta.black_level;

            out[i] = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, full_scale));
        }
    }, 8);

    return RawFrame(width, height, std::move(out), meta);
}

} // namespace endonoise
