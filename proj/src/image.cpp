#include "toporig/image.hpp"

#include <png.h>
// jpeglib.h needs stdio declarations first
#include <cstdio>
#include <jpeglib.h>

#include <csetjmp>
#include <cstring>
#include <fstream>

namespace toporig {

Image to_rgb(const Image& img) {
    if (img.channels == 3) return img;
    Image out(img.width, img.height, 3);
    for (std::size_t i = 0, n = std::size_t(img.width) * img.height; i < n; ++i) {
        const std::uint8_t* s = img.data.data() + i * img.channels;
        std::uint8_t* d = out.data.data() + i * 3;
        if (img.channels == 1) {
            d[0] = d[1] = d[2] = s[0];
        } else {
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    }
    return out;
}

Image to_rgba(const Image& img) {
    if (img.channels == 4) return img;
    Image out(img.width, img.height, 4);
    for (std::size_t i = 0, n = std::size_t(img.width) * img.height; i < n; ++i) {
        const std::uint8_t* s = img.data.data() + i * img.channels;
        std::uint8_t* d = out.data.data() + i * 4;
        if (img.channels == 1) {
            d[0] = d[1] = d[2] = s[0];
        } else {
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
        d[3] = 255;
    }
    return out;
}

namespace {

bool is_png(std::span<const std::uint8_t> b) {
    return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}
bool is_jpeg(std::span<const std::uint8_t> b) { return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF; }

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw Error(ErrorCode::Decode, std::string("png: ") + image.message);
    const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    image.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    Image img(int(image.width), int(image.height), alpha ? 4 : 3);
    if (!png_image_finish_read(&image, nullptr, img.data.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw Error(ErrorCode::Decode, "png: " + msg);
    }
    return img;
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// No C++ objects with destructors may live across the setjmp in this function.
bool decode_jpeg_raw(std::span<const std::uint8_t> bytes, bool header_only, Image* out, char* message) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        std::strncpy(message, err.message, JMSG_LENGTH_MAX);
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    if (header_only) {
        out->width = int(cinfo.image_width);
        out->height = int(cinfo.image_height);
        jpeg_destroy_decompress(&cinfo);
        return true;
    }
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out->width = int(cinfo.output_width);
    out->height = int(cinfo.output_height);
    out->channels = 3;
    out->data.resize(std::size_t(out->width) * out->height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out->data.data() + std::size_t(cinfo.output_scanline) * out->width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

} // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.channels != 3 && img.channels != 4 && img.channels != 1)
        throw Error(ErrorCode::InvalidInput, "encode_png: unsupported channel count");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(img.width);
    image.height = png_uint_32(img.height);
    image.format = img.channels == 4 ? PNG_FORMAT_RGBA : img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, img.data.data(), 0, nullptr))
        throw Error(ErrorCode::Io, std::string("png: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data.data(), 0, nullptr))
        throw Error(ErrorCode::Io, std::string("png: ") + image.message);
    out.resize(size);
    return out;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) {
        Image img;
        char message[JMSG_LENGTH_MAX] = {};
        if (!decode_jpeg_raw(bytes, false, &img, message))
            throw Error(ErrorCode::Decode, std::string("jpeg: ") + message);
        return img;
    }
    throw Error(ErrorCode::Decode, "unrecognized image format");
}

ImageInfo probe_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> head(64 * 1024);
    in.read(reinterpret_cast<char*>(head.data()), std::streamsize(head.size()));
    head.resize(std::size_t(in.gcount()));
    if (is_png(head)) {
        if (head.size() < 24) throw Error(ErrorCode::Decode, "png: truncated header");
        auto be32 = [&](std::size_t o) {
            return int((head[o] << 24) | (head[o + 1] << 16) | (head[o + 2] << 8) | head[o + 3]);
        };
        return {be32(16), be32(20)};
    }
    if (is_jpeg(head)) {
        // SOF markers can sit past the first chunk when EXIF blocks are large.
        const auto bytes = read_file(path);
        Image img;
        char message[JMSG_LENGTH_MAX] = {};
        if (!decode_jpeg_raw(bytes, true, &img, message))
            throw Error(ErrorCode::Decode, std::string("jpeg: ") + message);
        return {img.width, img.height};
    }
    throw Error(ErrorCode::Decode, "unrecognized image format: " + path.string());
}

Image read_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return decode_image(bytes);
}

void write_png(const std::filesystem::path& path, const Image& img) { write_file_atomic(path, encode_png(img)); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
        if (!out) throw Error(ErrorCode::Io, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "rename failed: " + path.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace toporig
