#pragma once

#include <string>
#include <vector>

namespace vaxpulse::svg {

// Minimal SVG writer: enough primitives for line charts with markers and
// text annotations. Coordinates are emitted with fixed precision so output
// is byte-reproducible.
class Document {
public:
    Document(double width, double height);

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0);
    void polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke,
                  double stroke_width = 1.0);
    void circle(double cx, double cy, double r, const std::string& fill);
    void rect(double x, double y, double w, double h, const std::string& fill);
    void diamond(double cx, double cy, double r, const std::string& fill);
    void text(double x, double y, const std::string& content, double size = 11,
              const std::string& anchor = "start", const std::string& fill = "#333333");
    void comment(const std::string& content);

    double width() const { return width_; }
    double height() const { return height_; }

    std::string str() const;

private:
    double width_, height_;
    std::string body_;
};

// Affine data-to-pixel mapping for a plot area.
struct Scale {
    double d0 = 0, d1 = 1;  // data range
    double p0 = 0, p1 = 1;  // pixel range

    double operator()(double v) const { return p0 + (v - d0) / (d1 - d0) * (p1 - p0); }
};

std::string escape_text(const std::string& s);

}  // namespace vaxpulse::svg
