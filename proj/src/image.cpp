#include "gslm/image.hpp"

#include <fstream>

namespace gslm {

void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<uint8_t>& pixels) {
    if (pixels.size() != static_cast<size_t>(width) * static_cast<size_t>(height))
        throw std::invalid_argument("pgm: pixel count does not match " + std::to_string(width) + "x" +
                                    std::to_string(height));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("pgm: cannot open " + path.string() + " for writing");
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!f) throw std::runtime_error("pgm: write failed for " + path.string());
}

Pgm read_pgm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("pgm: cannot open " + path.string());
    std::string magic;
    f >> magic;
    if (magic != "P5") throw std::runtime_error("pgm: " + path.string() + ": not a P5 file");
    int w = 0, h = 0, maxv = 0;
    f >> w >> h >> maxv;
    if (!f || w <= 0 || h <= 0 || maxv != 255)
        throw std::runtime_error("pgm: " + path.string() + ": bad header");
    f.get();  // single whitespace after header
    Pgm out;
    out.width = w;
    out.height = h;
    out.pixels.resize(static_cast<size_t>(w) * static_cast<size_t>(h));
    f.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(out.pixels.size()));
    if (f.gcount() != static_cast<std::streamsize>(out.pixels.size()))
        throw std::runtime_error("pgm: " + path.string() + ": truncated");
    return out;
}

Tensor nearest_resize(const Tensor& src, int out_h, int out_w) {
    if (src.rank() != 2) throw std::invalid_argument("nearest_resize: expected rank-2, got " + shape_str(src.shape()));
    const int sh = src.extent(0), sw = src.extent(1);
    Tensor out({out_h, out_w});
    for (int y = 0; y < out_h; ++y) {
        const int sy = nearest_index(y, sh, out_h);
        for (int x = 0; x < out_w; ++x)
            out.at(y, x) = src.at(sy, nearest_index(x, sw, out_w));
    }
    return out;
}

std::vector<uint8_t> nearest_resize_u8(const std::vector<uint8_t>& src, int src_h, int src_w,
                                       int out_h, int out_w) {
    if (src.size() != static_cast<size_t>(src_h) * static_cast<size_t>(src_w))
        throw std::invalid_argument("nearest_resize_u8: size mismatch");
    std::vector<uint8_t> out(static_cast<size_t>(out_h) * static_cast<size_t>(out_w));
    for (int y = 0; y < out_h; ++y) {
        const int sy = nearest_index(y, src_h, out_h);
        for (int x = 0; x < out_w; ++x)
            out[static_cast<size_t>(y) * out_w + x] =
                src[static_cast<size_t>(sy) * src_w + nearest_index(x, src_w, out_w)];
    }
    return out;
}

std::vector<uint8_t> map_to_bytes(const Tensor& map) {
    if (map.rank() != 2) throw std::invalid_argument("map_to_bytes: expected rank-2");
    std::vector<uint8_t> out(map.size());
    for (size_t i = 0; i < map.size(); ++i) {
        double v = map[i] * 255.0 + 0.5;
        if (v < 0.0) v = 0.0;
        if (v > 255.0) v = 255.0;
        out[i] = static_cast<uint8_t>(v);
    }
    return out;
}

}  // namespace gslm
