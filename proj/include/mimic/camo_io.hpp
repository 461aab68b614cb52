/*!
  \file camo_io.hpp
  \brief JSON form of camouflaged netlists

      { "cells": [ { "id": ..., "apparent": { "type": ..., "inputs": [...] },
                     "true": { "type": ..., "inputs": [...] }, "dummy": [...] } ],
        "pis": [ { "id": ..., "name": ... } ], "pos": [ ... ] }

  Cells left visible by the graph matcher carry `"exposed": true`.
*/

#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "covert.hpp"
#include "errors.hpp"

namespace mimic
{

inline nlohmann::json gate_spec_to_json( gate_spec const& g )
{
  return { { "type", std::string( to_string( g.type ) ) }, { "inputs", g.inputs } };
}

inline gate_spec gate_spec_from_json( nlohmann::json const& j )
{
  auto const t = gate_from_string( j.at( "type" ).get<std::string>() );
  if ( !t )
    throw mimic_error( "unknown gate type '" + j.at( "type" ).get<std::string>() + "'" );
  return { *t, j.at( "inputs" ).get<std::vector<std::string>>() };
}

inline nlohmann::json to_json( camouflaged_netlist const& c )
{
  nlohmann::json cells = nlohmann::json::array();
  for ( auto const& cell : c.cells )
  {
    nlohmann::json jc = { { "id", cell.id },
                          { "apparent", gate_spec_to_json( cell.apparent ) },
                          { "true", gate_spec_to_json( cell.true_fn ) },
                          { "dummy", cell.dummy } };
    if ( cell.exposed )
      jc["exposed"] = true;
    cells.push_back( std::move( jc ) );
  }
  auto ports = []( std::vector<named_port> const& ps ) {
    nlohmann::json a = nlohmann::json::array();
    for ( auto const& p : ps )
      a.push_back( { { "id", p.id }, { "name", p.name } } );
    return a;
  };
  return { { "cells", std::move( cells ) }, { "pis", ports( c.pis ) }, { "pos", ports( c.pos ) } };
}

/*! \brief Parses and validates (cell legality and both views). */
inline camouflaged_netlist camo_from_json( nlohmann::json const& j )
{
  camouflaged_netlist c;
  try
  {
    for ( auto const& jc : j.at( "cells" ) )
    {
      covert_cell cell;
      cell.id = jc.at( "id" ).get<std::string>();
      cell.apparent = gate_spec_from_json( jc.at( "apparent" ) );
      cell.true_fn = gate_spec_from_json( jc.at( "true" ) );
      cell.dummy = jc.at( "dummy" ).get<std::vector<uint32_t>>();
      cell.exposed = jc.value( "exposed", false );
      c.cells.push_back( std::move( cell ) );
    }
    for ( auto const& jp : j.at( "pis" ) )
      c.pis.push_back( { jp.at( "id" ).get<std::string>(), jp.at( "name" ).get<std::string>() } );
    for ( auto const& jp : j.at( "pos" ) )
      c.pos.push_back( { jp.at( "id" ).get<std::string>(), jp.at( "name" ).get<std::string>() } );
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw mimic_error( std::string( "malformed camouflaged netlist: " ) + e.what() );
  }
  views( c );
  return c;
}

inline void write_json_file( std::string const& path, nlohmann::json const& j )
{
  std::ofstream out( path );
  if ( !out )
    throw mimic_error( "cannot write '" + path + "'" );
  out << j.dump( 2 ) << "\n";
}

inline nlohmann::json read_json_file( std::string const& path )
{
  std::ifstream in( path );
  if ( !in )
    throw mimic_error( "cannot open '" + path + "'" );
  try
  {
    return nlohmann::json::parse( in );
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw mimic_error( "'" + path + "': " + e.what() );
  }
}

} // namespace mimic
