/*!
  \file errors.hpp
  \brief Exception types
*/

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mimic
{

struct mimic_error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/*! \brief Malformed `.bench` input; `line` is 1-based, 0 when not tied to a line. */
struct parse_error : mimic_error
{
  parse_error( std::size_t line, std::string const& what )
      : mimic_error( line ? "line " + std::to_string( line ) + ": " + what : what ), line( line )
  {
  }
  std::size_t line;
};

/*! \brief The graph contains a cycle; `node` lies on one. */
struct cycle_error : mimic_error
{
  explicit cycle_error( std::string node_name )
      : mimic_error( "cycle through node '" + node_name + "'" ), node( std::move( node_name ) )
  {
  }
  std::string node;
};

struct netlist_error : mimic_error
{
  using mimic_error::mimic_error;
};

} // namespace mimic
