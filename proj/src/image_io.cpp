#include "veil/image_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "veil/diagnostics.hpp"

namespace veil {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_mat(const cv::Mat& mat, const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".jpg" || ext == ".jpeg") {
        throw IoError("refusing to write lossy format: " + path.string());
    }
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), mat);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write " + path.string() + ": " + e.what());
    }
    if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace

bool is_image_path(const std::filesystem::path& path) {
    static constexpr std::array<const char*, 8> kExt = {".png", ".ppm", ".pnm", ".tif",
                                                        ".tiff", ".bmp", ".jpg", ".jpeg"};
    const std::string ext = lower_extension(path);
    return std::find(kExt.begin(), kExt.end(), ext) != kExt.end();
}

Image load_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw IoError("cannot read " + path.string() + ": no such file");
    }
    cv::Mat raw;
    try {
        raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception& e) {
        throw IoError("cannot decode " + path.string() + ": " + e.what());
    }
    if (raw.data == nullptr) throw IoError("cannot decode " + path.string());
    if (raw.cols < 1 || raw.rows < 1) throw IoError(path.string() + ": zero-dimension raster");

    double scale = 0.0;
    if (raw.depth() == CV_8U) {
        scale = 255.0;
    } else if (raw.depth() == CV_16U) {
        scale = 65535.0;
    } else {
        throw IoError(path.string() + ": unsupported sample type (need 8- or 16-bit)");
    }
    const int channels = raw.channels();
    if (channels != 3 && channels != 4) {
        throw IoError(path.string() + ": unsupported channel count " + std::to_string(channels) +
                      " (need RGB)");
    }
    if (channels == 4) warn(path.string() + ": alpha channel dropped");

    Image img(raw.cols, raw.rows);
    cv::Mat wide;
    raw.convertTo(wide, CV_MAKETYPE(CV_64F, channels));
    for (int y = 0; y < raw.rows; ++y) {
        const double* src = wide.ptr<double>(y);
        for (int x = 0; x < raw.cols; ++x) {
            // OpenCV stores BGR(A).
            img.at(x, y, 0) = src[x * channels + 2] / scale;
            img.at(x, y, 1) = src[x * channels + 1] / scale;
            img.at(x, y, 2) = src[x * channels + 0] / scale;
        }
    }
    return img;
}

void save_image(const Image& image, const std::filesystem::path& path) {
    if (image.empty()) throw InvalidArgument("save_image: empty image");
    cv::Mat mat(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* dst = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < image.width(); ++x) {
            dst[x * 3 + 0] = quantize(image.at(x, y, 2));
            dst[x * 3 + 1] = quantize(image.at(x, y, 1));
            dst[x * 3 + 2] = quantize(image.at(x, y, 0));
        }
    }
    write_mat(mat, path);
}

void save_scalar_map(const ScalarMap& map, const std::filesystem::path& path) {
    if (map.empty()) throw InvalidArgument("save_scalar_map: empty map");
    cv::Mat mat(map.height(), map.width(), CV_8UC1);
    for (int y = 0; y < map.height(); ++y) {
        auto* dst = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < map.width(); ++x) dst[x] = quantize(map.at(x, y));
    }
    write_mat(mat, path);
}

void save_scalar_csv(const ScalarMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    std::array<char, 32> buf{};
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            if (x) out << ',';
            auto res = std::to_chars(buf.data(), buf.data() + buf.size(), map.at(x, y));
            out.write(buf.data(), res.ptr - buf.data());
        }
        out << '\n';
    }
    if (!out) throw IoError("cannot write " + path.string());
}

ScalarMap load_scalar_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<double> values;
    int width = -1;
    int height = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int count = 0;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{}) throw IoError(path.string() + ": malformed number");
            values.push_back(v);
            ++count;
        }
        if (width < 0) width = count;
        if (count != width) throw IoError(path.string() + ": ragged rows");
        ++height;
    }
    if (width < 1 || height < 1) throw IoError(path.string() + ": empty map");
    return ScalarMap(width, height, std::move(values));
}

}  // namespace veil
