#include "c2f/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

// jpeglib.h needs size_t and FILE declared first.
#include <jpeglib.h>

#include "c2f/error.hpp"

namespace c2f {

namespace {

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw DataError(std::string("PNG decode failed: ") + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    RgbImage out;
    out.width = img.width;
    out.height = img.height;
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw DataError(std::string("PNG decode failed: ") + img.message);
    }
    return out;
}

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = jpeg_error_exit;
    RgbImage out;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError(std::string("JPEG decode failed: ") + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out.width = cinfo.output_width;
    out.height = cinfo.output_height;
    out.pixels.resize(out.width * out.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

// Binary P6 with maxval <= 255; '#' comments allowed in the header.
RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 2;
    auto next_number = [&]() -> std::size_t {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw DataError("PPM decode failed: bad header");
        std::size_t v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
            if (v > 1u << 24) throw DataError("PPM decode failed: header value too large");
            ++pos;
        }
        return v;
    };
    RgbImage out;
    out.width = next_number();
    out.height = next_number();
    const std::size_t maxval = next_number();
    if (maxval == 0 || maxval > 255) throw DataError("PPM decode failed: only 8-bit maxval supported");
    ++pos;  // single whitespace before raster
    const std::size_t need = out.width * out.height * 3;
    if (pos + need > bytes.size()) throw DataError("PPM decode failed: truncated raster");
    out.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    if (maxval != 255) {
        for (auto& p : out.pixels) p = static_cast<std::uint8_t>(std::min<std::size_t>(255, p * 255 / maxval));
    }
    return out;
}

}  // namespace

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) {
    static const std::uint8_t png_sig[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::equal(std::begin(png_sig), std::end(png_sig), bytes.begin())) {
        return ImageFormat::png;
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return ImageFormat::jpeg;
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return ImageFormat::ppm;
    return ImageFormat::unknown;
}

RgbImage decode_rgb(std::span<const std::uint8_t> bytes) {
    RgbImage img;
    switch (sniff_format(bytes)) {
        case ImageFormat::png: img = decode_png(bytes); break;
        case ImageFormat::jpeg: img = decode_jpeg(bytes); break;
        case ImageFormat::ppm: img = decode_ppm(bytes); break;
        case ImageFormat::unknown: throw DataError("unsupported or undecodable image data");
    }
    if (img.width == 0 || img.height == 0) throw DataError("image has a zero dimension");
    return img;
}

Tensor to_tensor(const RgbImage& image, std::size_t size) {
    if (image.width == 0 || image.height == 0) throw DataError("image has a zero dimension");
    if (size == 0) throw DataError("target size must be positive");
    Tensor out({3, size, size});
    const double sx = static_cast<double>(image.width) / static_cast<double>(size);
    const double sy = static_cast<double>(image.height) / static_cast<double>(size);
    auto px = [&](std::size_t x, std::size_t y, std::size_t c) -> double {
        return image.pixels[(y * image.width + x) * 3 + c];
    };
    for (std::size_t oy = 0; oy < size; ++oy) {
        const double fy = std::clamp((static_cast<double>(oy) + 0.5) * sy - 0.5, 0.0,
                                     static_cast<double>(image.height - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t ox = 0; ox < size; ++ox) {
            const double fx = std::clamp((static_cast<double>(ox) + 0.5) * sx - 0.5, 0.0,
                                         static_cast<double>(image.width - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = px(x0, y0, c) * (1.0 - wx) + px(x1, y0, c) * wx;
                const double bottom = px(x0, y1, c) * (1.0 - wx) + px(x1, y1, c) * wx;
                const double v = top * (1.0 - wy) + bottom * wy;
                out[(c * size + oy) * size + ox] = static_cast<float>(v / 255.0);
            }
        }
    }
    return out;
}

Tensor decode_image(std::span<const std::uint8_t> bytes, std::size_t size) {
    return to_tensor(decode_rgb(bytes), size);
}

Tensor load_image(const std::filesystem::path& path, std::size_t size) {
    const auto bytes = read_file(path);
    try {
        return decode_image(bytes, size);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
    const std::string header =
        "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw DataError(std::string("PNG encode failed: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw DataError(std::string("PNG encode failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> encode_jpeg(const RgbImage& image, int quality) {
    jpeg_compress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = jpeg_error_exit;
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(buffer);
        throw DataError(std::string("JPEG encode failed: ") + jerr.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = static_cast<JDIMENSION>(image.width);
    cinfo.image_height = static_cast<JDIMENSION>(image.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto* row = const_cast<JSAMPROW>(image.pixels.data() + static_cast<std::size_t>(cinfo.next_scanline) *
                                                                    image.width * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<std::uint8_t> out(buffer, buffer + size);
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace c2f
