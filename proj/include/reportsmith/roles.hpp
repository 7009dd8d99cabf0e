#pragma once

#include <string>
#include <string_view>

namespace reportsmith {

enum class Task { distribution, correlation, ranking, trend, part_to_whole, comparison, outlier };
enum class Role { measure, dimension, time, detail };

std::string_view to_string(Task t);
std::string_view to_string(Role r);
/// Both throw ParseError on names outside the taxonomy.
Task task_from_string(std::string_view s);
Role role_from_string(std::string_view s);
bool is_task_name(std::string_view s);

inline constexpr Task kAllTasks[] = {Task::distribution, Task::correlation,   Task::ranking,   Task::trend,
                                     Task::part_to_whole, Task::comparison, Task::outlier};

}  // namespace reportsmith
