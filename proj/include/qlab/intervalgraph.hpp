#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qlab/common.hpp"
#include "qlab/simulation.hpp"

namespace qlab {

enum class Discipline { kFcfs, kLcfs, kOrderedStation };

// Maps "fcfs" / "lcfs" / "stations" (case-insensitive); throws domain_error.
Discipline parse_discipline(std::string_view name);
std::string_view discipline_name(Discipline d);

// Sojourn interval of one customer in 1-based event positions: present from
// its arrival event through its departure event.
struct CustomerInterval {
  std::uint64_t arrival_pos = 0;
  std::uint64_t departure_pos = 0;
  std::uint32_t service_order = 0;  // rank of departure_pos, 1-based
};

struct CustomerIntervals {
  std::vector<CustomerInterval> customers;  // sorted by service_order
};

struct IntervalGraph {
  std::uint32_t n = 0;
  // u < v, sorted lexicographically, vertices labeled by service order.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  // Construction witness (by service order); lets clique/coloring queries run
  // on the interval representation instead of generic graph algorithms.
  std::vector<CustomerInterval> intervals;

  bool adjacent(std::uint32_t u, std::uint32_t v) const;
};

// Builds an EventTrace from a string over {A,D} (case-insensitive, optional
// whitespace); throws domain_error when the walk is not a single busy period.
EventTrace parse_trace(std::string_view text);

// Matches each departure event to a customer. FCFS pops the earliest arrival;
// LCFS pops the latest-arrived waiting customer (non-preemptive: service in
// progress always completes); ORDERED_STATION pops the occupant of the
// lowest-index waiting station, stations being claimed first-vacant on
// arrival. Malformed traces are rejected with domain_error.
CustomerIntervals assign_service(const EventTrace& trace, Discipline discipline);

// Edge (u,v) iff arrival_pos(u) < departure_pos(v) and vice versa — strict
// event-index overlap, so a departure and a later arrival never touch.
IntervalGraph build_graph(const CustomerIntervals& intervals);

// Maximum simultaneous presence, by endpoint sweep. Equals K of the trace.
std::uint32_t clique_number(const CustomerIntervals& intervals);
std::uint32_t clique_number(const IntervalGraph& graph);

// Greedy coloring over intervals sorted by arrival position (optimal on
// interval graphs); throws internal_error if the color count ever differs
// from the clique number.
std::uint32_t chromatic_number(const CustomerIntervals& intervals);
std::uint32_t chromatic_number(const IntervalGraph& graph);

std::string to_dot(const IntervalGraph& graph);
std::string to_edge_list(const IntervalGraph& graph);  // "u v" per line

}  // namespace qlab
