#include "svct/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "svct/error.hpp"
#include "svct/text_config.hpp"

namespace svct {

namespace {

constexpr char kMagic[8] = {'S', 'V', 'C', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* field) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(std::string("checkpoint truncated reading ") + field);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

std::vector<double> list_or_empty(const KeyValues& kv, const char* key) {
    const std::string& v = require_value(kv, key);
    if (v.empty()) return {};
    return parse_double_list(key, v);
}

template <typename Block>
void require_finite_params(const Block& b, const char* what) {
    for (float v : b.values()) {
        if (!std::isfinite(v)) throw FormatError(std::string("checkpoint: non-finite ") + what + " parameter");
    }
}

}  // namespace

bool StageCheckpoint::operator==(const StageCheckpoint& o) const {
    return stage_index == o.stage_index && gen == o.gen && disc == o.disc && config == o.config &&
           history.gen_loss == o.history.gen_loss && history.mse == o.history.mse &&
           history.lambda == o.history.lambda && history.disc_loss == o.history.disc_loss &&
           intensity_scale == o.intensity_scale && mse_initial == o.mse_initial && mse_final == o.mse_final;
}

void write_checkpoint(std::ostream& out, const StageCheckpoint& c) {
    std::string h;
    h += "stage=" + std::to_string(c.stage_index) + '\n';
    h += "epochs=" + std::to_string(c.config.epochs) + '\n';
    h += "batch_size=" + std::to_string(c.config.batch_size) + '\n';
    h += "disc_every=" + std::to_string(c.config.disc_every) + '\n';
    h += "lr_g=" + format_double(c.config.lr_g) + '\n';
    h += "lr_d=" + format_double(c.config.lr_d) + '\n';
    h += "seed=" + std::to_string(c.config.seed) + '\n';
    h += "intensity_scale=" + format_double(c.intensity_scale) + '\n';
    h += "mse_initial=" + format_double(c.mse_initial) + '\n';
    h += "mse_final=" + format_double(c.mse_final) + '\n';
    h += "gen_loss=" + join_doubles(c.history.gen_loss) + '\n';
    h += "mse=" + join_doubles(c.history.mse) + '\n';
    h += "lambda=" + join_doubles(c.history.lambda) + '\n';
    h += "disc_loss=" + join_doubles(c.history.disc_loss) + '\n';
    out.write(kMagic, 8);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(h.size()));
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    nn::write_params(out, c.gen);
    nn::write_params(out, c.disc);
    if (!out) throw FormatError("checkpoint: write failed");
}

StageCheckpoint read_checkpoint(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8)) throw FormatError("checkpoint truncated reading magic");
    if (std::memcmp(magic, kMagic, 8) != 0) throw FormatError("checkpoint: bad magic");
    const auto version = get_u32(in, "version");
    if (version != kVersion) throw FormatError("checkpoint: unknown version " + std::to_string(version));
    const auto len = get_u32(in, "header length");
    if (len > (1u << 26)) throw FormatError("checkpoint: header length implausible");
    std::string h(len, '\0');
    if (!in.read(h.data(), len)) throw FormatError("checkpoint truncated reading header");
    const auto kv = parse_key_values(h);

    StageCheckpoint c;
    c.stage_index = parse_int("stage", require_value(kv, "stage"));
    c.config.epochs = parse_int("epochs", require_value(kv, "epochs"));
    c.config.batch_size = parse_int("batch_size", require_value(kv, "batch_size"));
    c.config.disc_every = parse_int("disc_every", require_value(kv, "disc_every"));
    c.config.lr_g = parse_double("lr_g", require_value(kv, "lr_g"));
    c.config.lr_d = parse_double("lr_d", require_value(kv, "lr_d"));
    const std::string& seed = require_value(kv, "seed");
    try {
        c.config.seed = std::stoull(seed);
    } catch (const std::exception&) {
        throw FormatError("checkpoint: bad seed '" + seed + "'");
    }
    c.intensity_scale = parse_double("intensity_scale", require_value(kv, "intensity_scale"));
    c.mse_initial = parse_double("mse_initial", require_value(kv, "mse_initial"));
    c.mse_final = parse_double("mse_final", require_value(kv, "mse_final"));
    c.history.gen_loss = list_or_empty(kv, "gen_loss");
    c.history.mse = list_or_empty(kv, "mse");
    c.history.lambda = list_or_empty(kv, "lambda");
    c.history.disc_loss = list_or_empty(kv, "disc_loss");
    if (c.stage_index < 1) throw FormatError("checkpoint: stage must be >= 1");
    if (!(c.intensity_scale > 0)) throw FormatError("checkpoint: intensity_scale must be > 0");
    c.config.validate();
    c.gen = nn::read_generator_params(in);
    c.disc = nn::read_discriminator_params(in);
    require_finite_params(c.gen, "generator");
    require_finite_params(c.disc, "discriminator");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const StageCheckpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    write_checkpoint(out, ckpt);
}

StageCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return read_checkpoint(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace svct
