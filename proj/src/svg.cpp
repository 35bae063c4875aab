#include "vaxpulse/svg.hpp"

#include <cstdio>

namespace vaxpulse::svg {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string escape_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                    double stroke_width) {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
             num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(stroke_width) +
             "\"/>\n";
}

void Document::polyline(const std::vector<std::pair<double, double>>& points,
                        const std::string& stroke, double stroke_width) {
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
             num(stroke_width) + "\" points=\"";
    for (const auto& [x, y] : points) body_ += num(x) + "," + num(y) + " ";
    body_ += "\"/>\n";
}

void Document::circle(double cx, double cy, double r, const std::string& fill) {
    body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
             "\" fill=\"" + fill + "\"/>\n";
}

void Document::rect(double x, double y, double w, double h, const std::string& fill) {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
             "\" height=\"" + num(h) + "\" fill=\"" + fill + "\"/>\n";
}

void Document::diamond(double cx, double cy, double r, const std::string& fill) {
    body_ += "<path d=\"M" + num(cx) + " " + num(cy - r) + " L" + num(cx + r) + " " + num(cy) +
             " L" + num(cx) + " " + num(cy + r) + " L" + num(cx - r) + " " + num(cy) +
             " Z\" fill=\"" + fill + "\"/>\n";
}

void Document::text(double x, double y, const std::string& content, double size,
                    const std::string& anchor, const std::string& fill) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
             "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\" fill=\"" + fill +
             "\">" + escape_text(content) + "</text>\n";
}

void Document::comment(const std::string& content) {
    body_ += "<!-- " + content + " -->\n";
}

std::string Document::str() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
           "width=\"" +
           num(width_) + "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " +
           num(height_) + "\">\n<rect x=\"0\" y=\"0\" width=\"" + num(width_) + "\" height=\"" +
           num(height_) + "\" fill=\"#ffffff\"/>\n" + body_ + "</svg>\n";
}

}  // namespace vaxpulse::svg
