#pragma once

#include <string>
#include <vector>

namespace mdlsim {

/// Minimal deterministic SVG assembler: fixed-precision coordinates, no
/// external references, stable attribute order.
class SvgCanvas {
public:
    SvgCanvas(double width, double height);

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "");
    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0);
    void circle(double cx, double cy, double r, const std::string& fill, double opacity = 1.0);
    void polyline(const std::vector<std::pair<double, double>>& points,
                  const std::string& stroke, double width = 1.5);
    void text(double x, double y, const std::string& s, double size = 12.0,
              const std::string& anchor = "start", const std::string& fill = "#222222",
              bool bold = false);

    std::string finish() const;

private:
    std::string body_;
    double width_;
    double height_;
};

/// Diverging blue-white-red colour for v in [-vmax, vmax].
std::string diverging_color(double v, double vmax);

std::string xml_escape(const std::string& s);

}  // namespace mdlsim
