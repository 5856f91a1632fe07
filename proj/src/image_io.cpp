#include "sadepth/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sadepth::io {

Tensor load_image(const std::string& path) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("load_image: cannot read " + path);
    Tensor out({3, img.rows, img.cols});
    const int64_t plane = static_cast<int64_t>(img.rows) * img.cols;
    for (int y = 0; y < img.rows; ++y) {
        for (int x = 0; x < img.cols; ++x) {
            const cv::Vec3b bgr = img.at<cv::Vec3b>(y, x);
            const int64_t i = static_cast<int64_t>(y) * img.cols + x;
            out[0 * plane + i] = bgr[2] / 255.0;
            out[1 * plane + i] = bgr[1] / 255.0;
            out[2 * plane + i] = bgr[0] / 255.0;
        }
    }
    return out;
}

void save_image_u8(const std::string& path, const Tensor& image) {
    if (image.ndim() != 3 || (image.dim(0) != 3 && image.dim(0) != 1)) {
        throw std::invalid_argument("save_image_u8: expected (3,H,W) or (1,H,W)");
    }
    const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const int64_t plane = h * w;
    auto to_u8 = [](double v) { return static_cast<uchar>(std::lround(std::min(std::max(v, 0.0), 1.0) * 255.0)); };
    cv::Mat img(static_cast<int>(h), static_cast<int>(w), c == 3 ? CV_8UC3 : CV_8UC1);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const int64_t i = y * w + x;
            if (c == 3) {
                img.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x)) =
                    cv::Vec3b(to_u8(image[2 * plane + i]), to_u8(image[plane + i]), to_u8(image[i]));
            } else {
                img.at<uchar>(static_cast<int>(y), static_cast<int>(x)) = to_u8(image[i]);
            }
        }
    if (!cv::imwrite(path, img)) throw std::runtime_error("save_image_u8: cannot write " + path);
}

void save_gray16(const std::string& path, const Tensor& map, double scale) {
    if (map.ndim() != 2 && !(map.ndim() == 3 && map.dim(0) == 1)) {
        throw std::invalid_argument("save_gray16: expected (H,W) or (1,H,W)");
    }
    const int64_t h = map.dim(map.ndim() - 2), w = map.dim(map.ndim() - 1);
    cv::Mat img(static_cast<int>(h), static_cast<int>(w), CV_16UC1);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const double v = map[y * w + x] * scale;
            img.at<uint16_t>(static_cast<int>(y), static_cast<int>(x)) =
                static_cast<uint16_t>(std::lround(std::min(std::max(v, 0.0), 65535.0)));
        }
    if (!cv::imwrite(path, img)) throw std::runtime_error("save_gray16: cannot write " + path);
}

Tensor load_gray16(const std::string& path, double scale) {
    cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (img.empty() || img.type() != CV_16UC1) throw std::runtime_error("load_gray16: cannot read " + path);
    Tensor out({1, img.rows, img.cols});
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) {
            out[static_cast<int64_t>(y) * img.cols + x] = img.at<uint16_t>(y, x) / scale;
        }
    return out;
}

void save_f32(const std::string& path, const Tensor& map) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_f32: cannot open " + path);
    for (int64_t i = 0; i < map.numel(); ++i) {
        const float v = static_cast<float>(map[i]);
        f.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
}

Tensor load_f32(const std::string& path, int64_t h, int64_t w) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_f32: cannot open " + path);
    Tensor out({1, h, w});
    for (int64_t i = 0; i < h * w; ++i) {
        float v = 0;
        f.read(reinterpret_cast<char*>(&v), sizeof(float));
        if (!f) throw std::runtime_error("load_f32: short read in " + path);
        out[i] = v;
    }
    return out;
}

} // namespace sadepth::io
