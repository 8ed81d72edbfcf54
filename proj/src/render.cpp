#include "e2r/render.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace e2r::render {

namespace {

class Canvas {
 public:
  Canvas(const track::TrackModel& track, const RenderOptions& opts) : scale_(opts.pixels_per_meter) {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
    for (const auto* b : {&track.left_boundary(), &track.right_boundary()})
      for (const Vec2& p : *b) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
    x0_ = x0 - opts.margin;
    y1_ = y1 + opts.margin;
    width_ = (x1 - x0 + 2 * opts.margin) * scale_;
    height_ = (y1 - y0 + 2 * opts.margin) * scale_;
    os_ << std::fixed << std::setprecision(2);
    os_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
        << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  double X(double x) const { return (x - x0_) * scale_; }
  double Y(double y) const { return (y1_ - y) * scale_; }

  void polyline(const std::vector<Vec2>& pts, const char* stroke, double width, bool closed,
                const char* extra = "") {
    if (pts.empty()) return;
    os_ << '<' << (closed ? "polygon" : "polyline") << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os_ << (i ? " " : "") << X(pts[i].x) << ',' << Y(pts[i].y);
    os_ << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width << '"' << extra << "/>\n";
  }

  void box(const OrientedBox& b, const char* color) {
    const auto c = b.corners();
    os_ << "<polygon points=\"";
    for (std::size_t i = 0; i < 4; ++i) os_ << (i ? " " : "") << X(c[i].x) << ',' << Y(c[i].y);
    os_ << "\" fill=\"" << color << "\" fill-opacity=\"0.25\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
  }

  void cross(Vec2 p, const char* color) {
    const double r = 6.0;
    os_ << "<g stroke=\"" << color << "\" stroke-width=\"2.5\">"
        << "<line x1=\"" << X(p.x) - r << "\" y1=\"" << Y(p.y) - r << "\" x2=\"" << X(p.x) + r << "\" y2=\""
        << Y(p.y) + r << "\"/>"
        << "<line x1=\"" << X(p.x) - r << "\" y1=\"" << Y(p.y) + r << "\" x2=\"" << X(p.x) + r << "\" y2=\""
        << Y(p.y) - r << "\"/></g>\n";
  }

  void text(const std::string& s) {
    std::string esc;
    for (char c : s) {
      if (c == '<') esc += "&lt;";
      else if (c == '>') esc += "&gt;";
      else if (c == '&') esc += "&amp;";
      else esc += c;
    }
    os_ << "<text x=\"8\" y=\"20\" font-family=\"sans-serif\" font-size=\"16\" fill=\"black\">" << esc
        << "</text>\n";
  }

  void boundaries(const track::TrackModel& track) {
    polyline(track.left_boundary(), "black", 1.5, true);
    polyline(track.right_boundary(), "black", 1.5, true);
    polyline(track.centerline().points(), "#bbbbbb", 0.8, true, " stroke-dasharray=\"4 4\"");
  }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  double scale_;
  double x0_ = 0.0, y1_ = 0.0, width_ = 0.0, height_ = 0.0;
  std::ostringstream os_;
};

const char* agent_color(int agent) { return agent == 0 ? "blue" : agent == 1 ? "red" : "green"; }

}  // namespace

std::string track_svg(const track::TrackModel& track, const std::vector<track::Raceline>& racelines,
                      const RenderOptions& opts) {
  Canvas c(track, opts);
  c.boundaries(track);
  const char* colors[] = {"#2a9d8f", "#e9c46a", "#f4a261", "#264653"};
  for (std::size_t i = 0; i < racelines.size(); ++i) c.polyline(racelines[i].path().points(), colors[i % 4], 1.2, true);
  return c.finish();
}

std::string episode_svg(const track::TrackModel& track, const std::vector<sim::TraceRow>& trace,
                        const sim::SimConfig& sim, const std::optional<std::string>& label,
                        const RenderOptions& opts) {
  if (trace.empty()) throw std::invalid_argument("cannot render an empty trace");
  std::map<int, std::vector<const sim::TraceRow*>> by_agent;
  for (const auto& r : trace) by_agent[r.agent].push_back(&r);

  Canvas c(track, opts);
  c.boundaries(track);
  for (const auto& [agent, rows] : by_agent) {
    std::vector<Vec2> pts;
    pts.reserve(rows.size());
    for (const auto* r : rows) pts.push_back(r->state.position());
    c.polyline(pts, agent_color(agent), 2.0, false);
    double next = 0.0;
    for (const auto* r : rows) {
      if (r->t + 1e-9 < next) continue;
      c.box(sim::footprint(r->state, sim), agent_color(agent));
      next = r->t + opts.footprint_period;
    }
    const auto* last = rows.back();
    c.box(sim::footprint(last->state, sim), agent_color(agent));
    if (last->collided) c.cross(last->state.position(), "black");
  }
  if (label) c.text(*label);
  return c.finish();
}

}  // namespace e2r::render
