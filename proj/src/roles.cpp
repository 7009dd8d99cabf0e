#include "reportsmith/roles.hpp"

#include "reportsmith/error.hpp"

namespace reportsmith {

std::string_view to_string(Task t) {
    switch (t) {
        case Task::distribution: return "distribution";
        case Task::correlation: return "correlation";
        case Task::ranking: return "ranking";
        case Task::trend: return "trend";
        case Task::part_to_whole: return "part_to_whole";
        case Task::comparison: return "comparison";
        case Task::outlier: return "outlier";
    }
    return "distribution";
}

std::string_view to_string(Role r) {
    switch (r) {
        case Role::measure: return "measure";
        case Role::dimension: return "dimension";
        case Role::time: return "time";
        case Role::detail: return "detail";
    }
    return "detail";
}

bool is_task_name(std::string_view s) {
    for (Task t : kAllTasks)
        if (to_string(t) == s) return true;
    return false;
}

Task task_from_string(std::string_view s) {
    for (Task t : kAllTasks)
        if (to_string(t) == s) return t;
    throw Error(ErrorCode::ParseError, "unknown task '" + std::string(s) + "'");
}

Role role_from_string(std::string_view s) {
    for (Role r : {Role::measure, Role::dimension, Role::time, Role::detail})
        if (to_string(r) == s) return r;
    throw Error(ErrorCode::ParseError, "unknown role '" + std::string(s) + "'");
}

}  // namespace reportsmith
