#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmaccel::svg {

/// Minimal line/marker chart on a fixed 800x600 viewBox.
class Plot {
 public:
  Plot(std::string title, std::string x_label, std::string y_label);

  Plot& log_x(bool on = true) { log_x_ = on; return *this; }
  Plot& log_y(bool on = true) { log_y_ = on; return *this; }

  /// Adds a polyline (and markers when `markers` is set). Non-finite points
  /// and, on log axes, non-positive ones are skipped.
  Plot& add(std::string name, std::vector<double> x, std::vector<double> y, bool markers = false,
            bool dashed = false);

  void write(std::ostream& out) const;
  /// Writes to `path` via a temporary file and rename.
  void save(const std::string& path) const;

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
    bool markers;
    bool dashed;
  };
  std::string title_, x_label_, y_label_;
  bool log_x_ = false, log_y_ = false;
  std::vector<Series> series_;
};

}  // namespace mmaccel::svg
