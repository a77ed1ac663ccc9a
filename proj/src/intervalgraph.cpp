#include "qlab/intervalgraph.hpp"

#include <algorithm>
#include <cctype>
#include <queue>
#include <sstream>

namespace qlab {

Discipline parse_discipline(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "fcfs") return Discipline::kFcfs;
  if (lower == "lcfs") return Discipline::kLcfs;
  if (lower == "stations" || lower == "ordered-station") return Discipline::kOrderedStation;
  throw domain_error("unknown discipline '" + std::string(name) +
                     "' (expected fcfs, lcfs or stations)");
}

std::string_view discipline_name(Discipline d) {
  switch (d) {
    case Discipline::kFcfs: return "fcfs";
    case Discipline::kLcfs: return "lcfs";
    case Discipline::kOrderedStation: return "stations";
  }
  throw internal_error("discipline_name: unhandled tag");
}

bool IntervalGraph::adjacent(std::uint32_t u, std::uint32_t v) const {
  if (u == v) return false;
  auto e = std::minmax(u, v);
  return std::binary_search(edges.begin(), edges.end(), std::pair(e.first, e.second));
}

EventTrace parse_trace(std::string_view text) {
  EventTrace trace;
  std::uint64_t excess = 0, max_excess = 0;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u == 'A') {
      if (!trace.events.empty() && excess == 0) {
        throw domain_error("trace: arrival after the system emptied (not one busy period)");
      }
      trace.events.push_back(Event::kArrival);
      ++excess;
      max_excess = std::max(max_excess, excess);
    } else if (u == 'D') {
      if (excess == 0) throw domain_error("trace: departure from an empty system");
      trace.events.push_back(Event::kDeparture);
      --excess;
      ++trace.n;
    } else {
      throw domain_error(std::string("trace: unexpected character '") + c + "'");
    }
  }
  if (trace.events.empty()) throw domain_error("trace: empty");
  if (excess != 0) throw domain_error("trace: does not end with an empty system");
  trace.k = max_excess;
  return trace;
}

CustomerIntervals assign_service(const EventTrace& trace, Discipline discipline) {
  constexpr std::uint32_t kNone = UINT32_MAX;
  std::vector<CustomerInterval> customers;  // indexed by arrival order
  std::uint32_t in_service = kNone;
  std::vector<std::uint32_t> waiting;   // queue (FCFS) or stack (LCFS), arrival order
  std::vector<std::uint32_t> stations;  // 1-based slots, kNone when vacant
  std::size_t fcfs_head = 0;
  std::uint32_t served = 0;

  for (std::size_t idx = 0; idx < trace.events.size(); ++idx) {
    const auto pos = static_cast<std::uint64_t>(idx + 1);
    if (trace.events[idx] == Event::kArrival) {
      const auto c = static_cast<std::uint32_t>(customers.size());
      customers.push_back(CustomerInterval{pos, 0, 0});
      if (in_service == kNone) {
        if ((discipline == Discipline::kOrderedStation &&
             std::count(stations.begin(), stations.end(), kNone) !=
                 static_cast<std::ptrdiff_t>(stations.size())) ||
            (discipline != Discipline::kOrderedStation && fcfs_head < waiting.size())) {
          throw domain_error("trace: idle server with customers waiting");
        }
        in_service = c;
      } else if (discipline == Discipline::kOrderedStation) {
        std::size_t s = 0;
        while (s < stations.size() && stations[s] != kNone) ++s;
        if (s == stations.size()) stations.push_back(kNone);
        stations[s] = c;
      } else {
        waiting.push_back(c);
      }
    } else {
      if (in_service == kNone) throw domain_error("trace: departure from an empty system");
      customers[in_service].departure_pos = pos;
      customers[in_service].service_order = ++served;
      in_service = kNone;
      switch (discipline) {
        case Discipline::kFcfs:
          if (fcfs_head < waiting.size()) in_service = waiting[fcfs_head++];
          break;
        case Discipline::kLcfs:
          if (!waiting.empty()) {
            in_service = waiting.back();
            waiting.pop_back();
          }
          break;
        case Discipline::kOrderedStation: {
          std::size_t s = 0;
          while (s < stations.size() && stations[s] == kNone) ++s;
          if (s < stations.size()) {
            in_service = stations[s];
            stations[s] = kNone;
          }
          break;
        }
      }
    }
  }
  if (in_service != kNone) throw domain_error("trace: customer still in service at the end");
  for (const auto& c : customers) {
    if (c.departure_pos == 0) throw domain_error("trace: customer never departs");
  }

  CustomerIntervals out;
  out.customers = std::move(customers);
  std::sort(out.customers.begin(), out.customers.end(),
            [](const CustomerInterval& a, const CustomerInterval& b) {
              return a.service_order < b.service_order;
            });
  return out;
}

IntervalGraph build_graph(const CustomerIntervals& intervals) {
  IntervalGraph g;
  g.n = static_cast<std::uint32_t>(intervals.customers.size());
  g.intervals = intervals.customers;

  // Sweep by arrival position: a new interval meets every active interval
  // whose departure lies strictly past the new arrival.
  std::vector<const CustomerInterval*> order;
  order.reserve(intervals.customers.size());
  for (const auto& c : intervals.customers) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const CustomerInterval* a, const CustomerInterval* b) {
    return a->arrival_pos < b->arrival_pos;
  });

  using Active = std::pair<std::uint64_t, std::uint32_t>;  // departure_pos, label
  std::priority_queue<Active, std::vector<Active>, std::greater<>> active;
  for (const CustomerInterval* c : order) {
    while (!active.empty() && active.top().first <= c->arrival_pos) active.pop();
    if (!active.empty()) {
      // Every remaining active interval overlaps c; enumerate by draining into
      // a scratch list (heap has no iteration).
      std::vector<Active> keep;
      keep.reserve(active.size());
      while (!active.empty()) {
        keep.push_back(active.top());
        active.pop();
      }
      for (const Active& a : keep) {
        auto [u, v] = std::minmax(a.second, c->service_order);
        g.edges.emplace_back(u, v);
        active.push(a);
      }
    }
    active.push({c->departure_pos, c->service_order});
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::uint32_t clique_number(const CustomerIntervals& intervals) {
  if (intervals.customers.empty()) throw domain_error("clique_number: no customers");
  // Endpoint sweep; at equal positions departures come first, consistent with
  // strict overlap (never happens for trace-derived intervals).
  std::vector<std::pair<std::uint64_t, int>> endpoints;
  endpoints.reserve(2 * intervals.customers.size());
  for (const auto& c : intervals.customers) {
    endpoints.emplace_back(c.arrival_pos, +1);
    endpoints.emplace_back(c.departure_pos, -1);
  }
  std::sort(endpoints.begin(), endpoints.end());
  std::int64_t present = 0, best = 0;
  for (const auto& [pos, delta] : endpoints) {
    present += delta;
    best = std::max(best, present);
  }
  return static_cast<std::uint32_t>(best);
}

std::uint32_t clique_number(const IntervalGraph& graph) {
  return clique_number(CustomerIntervals{graph.intervals});
}

std::uint32_t chromatic_number(const CustomerIntervals& intervals) {
  const std::uint32_t clique = clique_number(intervals);

  std::vector<const CustomerInterval*> order;
  order.reserve(intervals.customers.size());
  for (const auto& c : intervals.customers) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const CustomerInterval* a, const CustomerInterval* b) {
    return a->arrival_pos < b->arrival_pos;
  });

  using Active = std::pair<std::uint64_t, std::uint32_t>;  // departure_pos, color
  std::priority_queue<Active, std::vector<Active>, std::greater<>> active;
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> free_colors;
  std::uint32_t colors_used = 0;
  for (const CustomerInterval* c : order) {
    while (!active.empty() && active.top().first <= c->arrival_pos) {
      free_colors.push(active.top().second);
      active.pop();
    }
    std::uint32_t color;
    if (!free_colors.empty()) {
      color = free_colors.top();
      free_colors.pop();
    } else {
      color = ++colors_used;
    }
    active.push({c->departure_pos, color});
  }
  if (colors_used != clique) {
    throw internal_error("chromatic_number: greedy coloring disagrees with clique number");
  }
  return colors_used;
}

std::uint32_t chromatic_number(const IntervalGraph& graph) {
  return chromatic_number(CustomerIntervals{graph.intervals});
}

std::string to_dot(const IntervalGraph& graph) {
  std::ostringstream out;
  out << "graph intervals {\n";
  for (std::uint32_t v = 1; v <= graph.n; ++v) out << "  " << v << ";\n";
  for (const auto& [u, v] : graph.edges) out << "  " << u << " -- " << v << ";\n";
  out << "}\n";
  return out.str();
}

std::string to_edge_list(const IntervalGraph& graph) {
  std::ostringstream out;
  for (const auto& [u, v] : graph.edges) out << u << ' ' << v << '\n';
  return out.str();
}

}  // namespace qlab
