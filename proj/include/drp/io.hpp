#pragma once

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "drp/types.hpp"

namespace drp {

// ---------------------------------------------------------------- numbers

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ------------------------------------------------------------------- PGM

inline void write_pgm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << img.size << " " << img.size << "\n65535\n";
    for (double v : img.pixels) {
        const double c = std::clamp(v, 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(c * 65535.0));
        const unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8),
                                        static_cast<unsigned char>(q & 0xff)};
        out.write(reinterpret_cast<const char*>(bytes), 2);
    }
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace detail {

inline int pnm_next_int(std::istream& in) {
    // skips whitespace and '#' comments
    while (true) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = 0;
    if (!(in >> v)) throw std::runtime_error("pgm: malformed header");
    return v;
}

}  // namespace detail

struct GrayData {
    int width = 0, height = 0;
    std::vector<double> pixels;  // normalized to [0, 1]
};

inline GrayData read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") throw std::runtime_error("read_pgm: not a PGM file: " + path);
    GrayData g;
    g.width = detail::pnm_next_int(in);
    g.height = detail::pnm_next_int(in);
    const int maxval = detail::pnm_next_int(in);
    if (g.width <= 0 || g.height <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error("read_pgm: bad header in " + path);
    const size_t count = static_cast<size_t>(g.width) * g.height;
    g.pixels.resize(count);
    if (magic == "P2") {
        for (size_t i = 0; i < count; ++i) g.pixels[i] = detail::pnm_next_int(in) / double(maxval);
    } else {
        in.get();  // single whitespace after maxval
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(count * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!in) throw std::runtime_error("read_pgm: truncated data in " + path);
        for (size_t i = 0; i < count; ++i) {
            const unsigned v = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
            g.pixels[i] = v / double(maxval);
        }
    }
    return g;
}

// ------------------------------------------------------------------- PNG
// Minimal grayscale codec (color type 0, bit depth 8/16, no interlace).

namespace detail {

inline void png_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

inline void png_chunk(std::ofstream& out, const char type[4],
                      const std::vector<unsigned char>& payload) {
    std::vector<unsigned char> head;
    png_be32(head, static_cast<std::uint32_t>(payload.size()));
    out.write(reinterpret_cast<const char*>(head.data()), 4);
    out.write(type, 4);
    if (!payload.empty())
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (!payload.empty()) crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
    std::vector<unsigned char> tail;
    png_be32(tail, static_cast<std::uint32_t>(crc));
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

inline int png_paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace detail

inline void write_png(const std::string& path, const Image& img) {
    const int n = img.size;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_png: cannot open " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr;
    detail::png_be32(ihdr, static_cast<std::uint32_t>(n));
    detail::png_be32(ihdr, static_cast<std::uint32_t>(n));
    ihdr.push_back(16);  // bit depth
    ihdr.push_back(0);   // grayscale
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // no interlace
    detail::png_chunk(out, "IHDR", ihdr);

    // filter 0 on every scanline, 16-bit big-endian samples
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(n) * (1 + 2 * n));
    for (int r = 0; r < n; ++r) {
        raw.push_back(0);
        for (int c = 0; c < n; ++c) {
            const double v = std::clamp(img.at(r, c), 0.0, 1.0);
            const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
            raw.push_back(static_cast<unsigned char>(q >> 8));
            raw.push_back(static_cast<unsigned char>(q & 0xff));
        }
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    compressed.resize(bound);
    detail::png_chunk(out, "IDAT", compressed);
    detail::png_chunk(out, "IEND", {});
    if (!out) throw std::runtime_error("write_png: write failed for " + path);
}

inline GrayData read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_png: cannot open " + path);
    unsigned char sig[8];
    in.read(reinterpret_cast<char*>(sig), 8);
    static const unsigned char want[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (!in || std::memcmp(sig, want, 8) != 0)
        throw std::runtime_error("read_png: not a PNG file: " + path);

    auto be32 = [](const unsigned char* p) {
        return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
               (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
    };

    std::uint32_t width = 0, height = 0;
    int depth = 0;
    std::vector<unsigned char> idat;
    bool seen_ihdr = false, seen_iend = false;
    while (in && !seen_iend) {
        unsigned char head[8];
        in.read(reinterpret_cast<char*>(head), 8);
        if (!in) break;
        const std::uint32_t len = be32(head);
        const std::string type(reinterpret_cast<char*>(head) + 4, 4);
        std::vector<unsigned char> payload(len);
        if (len) in.read(reinterpret_cast<char*>(payload.data()), len);
        in.ignore(4);  // crc
        if (type == "IHDR") {
            if (len != 13) throw std::runtime_error("read_png: bad IHDR");
            width = be32(payload.data());
            height = be32(payload.data() + 4);
            depth = payload[8];
            const int color = payload[9];
            if (color != 0)
                throw std::runtime_error("read_png: only grayscale PNG supported: " + path);
            if (depth != 8 && depth != 16)
                throw std::runtime_error("read_png: only 8/16-bit PNG supported: " + path);
            if (payload[12] != 0) throw std::runtime_error("read_png: interlaced PNG unsupported");
            seen_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload.begin(), payload.end());
        } else if (type == "IEND") {
            seen_iend = true;
        }
        // ancillary chunks ignored
    }
    if (!seen_ihdr || idat.empty() || width == 0 || height == 0)
        throw std::runtime_error("read_png: missing image data in " + path);

    const int bpp = depth / 8;
    const size_t row_bytes = static_cast<size_t>(width) * bpp;
    const size_t raw_size = (row_bytes + 1) * height;
    std::vector<unsigned char> raw(raw_size);
    uLongf got = static_cast<uLongf>(raw_size);
    if (uncompress(raw.data(), &got, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        got != raw_size)
        throw std::runtime_error("read_png: inflate failed for " + path);

    // undo per-scanline filters
    std::vector<unsigned char> prev(row_bytes, 0);
    GrayData g;
    g.width = static_cast<int>(width);
    g.height = static_cast<int>(height);
    g.pixels.resize(static_cast<size_t>(width) * height);
    const double maxval = depth == 16 ? 65535.0 : 255.0;
    for (std::uint32_t r = 0; r < height; ++r) {
        const unsigned char* src = raw.data() + r * (row_bytes + 1);
        const int filter = src[0];
        std::vector<unsigned char> line(src + 1, src + 1 + row_bytes);
        for (size_t i = 0; i < row_bytes; ++i) {
            const int a = i >= static_cast<size_t>(bpp) ? line[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
            switch (filter) {
                case 0: break;
                case 1: line[i] = static_cast<unsigned char>(line[i] + a); break;
                case 2: line[i] = static_cast<unsigned char>(line[i] + b); break;
                case 3: line[i] = static_cast<unsigned char>(line[i] + (a + b) / 2); break;
                case 4: line[i] = static_cast<unsigned char>(line[i] + detail::png_paeth(a, b, c)); break;
                default: throw std::runtime_error("read_png: unknown filter type");
            }
        }
        for (std::uint32_t cidx = 0; cidx < width; ++cidx) {
            const unsigned v = bpp == 2 ? (line[2 * cidx] << 8) | line[2 * cidx + 1] : line[cidx];
            g.pixels[static_cast<size_t>(r) * width + cidx] = v / maxval;
        }
        prev = line;
    }
    return g;
}

/** Dispatch on extension: .pgm / .png. */
inline GrayData read_gray_image(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_png(path);
    throw std::runtime_error("read_gray_image: unsupported extension (want .pgm or .png): " + path);
}

// ------------------------------------------------------------- raw doubles

inline void write_raw_f64(const std::string& path, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_raw_f64: cannot open " + path);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write_raw_f64: write failed for " + path);
}

inline std::vector<double> read_raw_f64(const std::string& path, size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_raw_f64: cannot open " + path);
    std::vector<double> data(count);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("read_raw_f64: expected " + std::to_string(count) +
                                      " doubles in " + path);
    return data;
}

// ----------------------------------------------------- geometry key=value

inline std::string geometry_to_kv(const Geometry& g) {
    std::ostringstream out;
    out << "image_size=" << g.image_size << "\n"
        << "num_views=" << g.num_views << "\n"
        << "num_detectors=" << g.num_detectors << "\n"
        << "detector_spacing=" << format_double(g.detector_spacing) << "\n"
        << "detector_offset=" << format_double(g.detector_offset) << "\n";
    return out.str();
}

inline Geometry geometry_from_kv(const std::string& text) {
    Geometry g;
    std::map<std::string, bool> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("geometry: line " + std::to_string(lineno) +
                                     ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
        };
        trim(key);
        trim(val);
        try {
            if (key == "image_size") g.image_size = std::stoi(val);
            else if (key == "num_views") g.num_views = std::stoi(val);
            else if (key == "num_detectors") g.num_detectors = std::stoi(val);
            else if (key == "detector_spacing") g.detector_spacing = std::stod(val);
            else if (key == "detector_offset") g.detector_offset = std::stod(val);
            else
                throw std::runtime_error("geometry: line " + std::to_string(lineno) +
                                         ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("geometry: line " + std::to_string(lineno) +
                                     ": bad value for '" + key + "'");
        }
        seen[key] = true;
    }
    g.validate();
    return g;
}

}  // namespace drp
