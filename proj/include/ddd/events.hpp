#pragma once

#include <string>

#include "ddd/errors.hpp"

namespace ddd {

enum class EventKind { drt, brake, question };

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::drt: return "drt";
    case EventKind::brake: return "brake";
    case EventKind::question: return "question";
  }
  return "?";
}

inline EventKind event_kind_from(const std::string& s) {
  if (s == "drt") return EventKind::drt;
  if (s == "brake") return EventKind::brake;
  if (s == "question") return EventKind::question;
  throw SchemaError("kind");
}

/// Closed time interval of one recorded task event, session-relative seconds.
struct EventInterval {
  EventKind kind = EventKind::drt;
  double start = 0.0;
  double end = 0.0;
};

}  // namespace ddd
