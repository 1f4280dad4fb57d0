#include "fishrect/image.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include <png.h>

#include "fishrect/common.hpp"

namespace fishrect {

namespace {

std::string lower_ext(const std::filesystem::path &path) {
    std::string ext = path.extension().string();
    for (char &c : ext)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

struct FileCloser {
    void operator()(std::FILE *f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

RasterImage read_png(const std::filesystem::path &path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::IoError, "libpng initialization failed");
    }
    RasterImage img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::ParseError, "corrupt PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_strip_alpha(png);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    if (img.channels != 1 && img.channels != 3)
        throw Error(ErrorCode::ParseError, "unsupported PNG channel count in " + path.string());
    return img;
}

void write_png(const std::filesystem::path &path, const RasterImage &img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "libpng initialization failed");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "PNG encoding failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void skip_pnm_space(std::istream &in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

RasterImage read_pnm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6")
        throw Error(ErrorCode::ParseError, path.string() + ": only binary PGM/PPM are supported");
    int w = 0, h = 0, maxval = 0;
    skip_pnm_space(in);
    in >> w;
    skip_pnm_space(in);
    in >> h;
    skip_pnm_space(in);
    in >> maxval;
    in.get();
    if (!in || w <= 0 || h <= 0 || maxval != 255)
        throw Error(ErrorCode::ParseError, path.string() + ": bad PNM header");
    RasterImage img(w, h, magic == "P5" ? 1 : 3);
    in.read(reinterpret_cast<char *>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!in)
        throw Error(ErrorCode::ParseError, path.string() + ": truncated PNM data");
    return img;
}

void write_pnm(const std::filesystem::path &path, const RasterImage &img) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char *>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

} // namespace

RasterImage to_gray(const RasterImage &img) {
    if (img.channels == 1)
        return img;
    RasterImage out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const int v = (299 * img.at(x, y, 0) + 587 * img.at(x, y, 1) + 114 * img.at(x, y, 2) + 500) / 1000;
            out.at(x, y) = static_cast<std::uint8_t>(v);
        }
    return out;
}

RasterImage read_image(const std::filesystem::path &path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png")
        return read_png(path);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
        return read_pnm(path);
    throw Error(ErrorCode::ParseError, "unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path &path, const RasterImage &img) {
    if (!img.valid())
        throw Error(ErrorCode::DimensionMismatch, "image buffer does not match its dimensions");
    const std::string ext = lower_ext(path);
    if (ext == ".png")
        return write_png(path, img);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
        if ((ext == ".pgm") != (img.channels == 1) && ext != ".pnm")
            throw Error(ErrorCode::DimensionMismatch, "channel count does not match " + ext);
        return write_pnm(path, img);
    }
    throw Error(ErrorCode::ParseError, "unsupported image format: " + path.string());
}

} // namespace fishrect
