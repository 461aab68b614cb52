// mimic: command-line front end for parsing, partitioning, camouflaging and scoring netlists.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <mimic/bench.hpp>
#include <mimic/camo_io.hpp>
#include <mimic/deploy.hpp>
#include <mimic/evaluator.hpp>
#include <mimic/levelize.hpp>
#include <mimic/matcher.hpp>
#include <mimic/partitioner.hpp>
#include <mimic/pipeline.hpp>
#include <mimic/tnet.hpp>

namespace
{

using namespace mimic;

enum exit_code : int
{
  ok = 0,
  below_threshold = 1,
  input_error = 2,
  internal_error = 3
};

/* bad user input: missing files, malformed netlists or configs, bad parameters */
struct input_failure : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct globals
{
  std::optional<uint64_t> seed;
  uint32_t jobs{ 1 };
  std::string out;
  std::string config_path;
};

netlist load_netlist( std::string const& path )
{
  try
  {
    return read_bench_file( path );
  }
  catch ( mimic_error const& e )
  {
    throw input_failure( e.what() );
  }
}

nlohmann::json load_json( std::string const& path )
{
  try
  {
    return read_json_file( path );
  }
  catch ( mimic_error const& e )
  {
    throw input_failure( e.what() );
  }
}

pipeline_config load_config( globals const& g )
{
  pipeline_config c;
  if ( !g.config_path.empty() )
  {
    try
    {
      c = pipeline_config_from_json( load_json( g.config_path ) );
    }
    catch ( mimic_error const& e )
    {
      throw input_failure( g.config_path + ": " + e.what() );
    }
  }
  if ( g.seed )
    c.seed = *g.seed;
  c.jobs = g.jobs;
  return c;
}

/* writes to the -o path, or stdout when none was given */
void emit( std::string const& path, std::string const& text )
{
  if ( path.empty() )
  {
    std::cout << text;
    return;
  }
  std::ofstream out( path );
  if ( !out )
    throw input_failure( "cannot write '" + path + "'" );
  out << text;
}

nlohmann::json summary( netlist const& ntk )
{
  return { { "pis", ntk.pis().size() },
           { "pos", ntk.pos().size() },
           { "gates", ntk.num_gates() },
           { "size", to_json( measure( ntk ) ) } };
}

int cmd_parse( globals const& g, std::string const& in )
{
  auto const ntk = load_netlist( in );
  if ( !g.out.empty() )
    emit( g.out, write_bench( ntk ) );
  std::cout << summary( ntk ).dump( 2 ) << "\n";
  return ok;
}

struct partition_opts
{
  std::string in;
  std::optional<uint32_t> k;
  std::optional<double> w_cut, w_io;
  std::optional<uint32_t> min_size, max_size;
};

int cmd_partition( globals const& g, partition_opts const& o )
{
  auto const cfg = load_config( g );
  auto const ntk = load_netlist( o.in );
  auto ps = cfg.partition;
  ps.k = o.k.value_or( cfg.k );
  ps.w_cut = o.w_cut.value_or( ps.w_cut );
  ps.w_io = o.w_io.value_or( ps.w_io );
  ps.min_size = o.min_size.value_or( ps.min_size );
  ps.max_size = o.max_size.value_or( ps.max_size );
  ps.seed = cfg.seed;
  if ( ps.k == 0 || ps.k > ntk.size() )
    throw input_failure( "k must lie in [1, " + std::to_string( ntk.size() ) + "]" );
  emit( g.out, partition_to_json( ntk, partition_pipeline( ntk, ps ) ).dump( 2 ) + "\n" );
  return ok;
}

struct camo_opts
{
  std::string appearance, function;
  std::optional<uint32_t> epochs;
  std::string trace, checkpoint;
};

nlohmann::json camo_summary( camouflaged_netlist const& camo, netlist const& f, netlist const& a, pipeline_config const& cfg )
{
  auto const acc = functional_accuracy( camo, f, cfg.sample_n, derive_seed( cfg.seed, 3 ) );
  return { { "cells", camo.cells.size() },
           { "covert_cells", std::count_if( camo.cells.begin(), camo.cells.end(), []( auto const& c ) { return c.apparent != c.true_fn; } ) },
           { "functional_accuracy", acc.percentage() },
           { "appearance_fidelity", appearance_fidelity( camo, a ) },
           { "overheads", to_json( overheads( camo, f ) ) } };
}

int cmd_match( globals const& g, camo_opts const& o )
{
  auto const cfg = load_config( g );
  auto const a = load_netlist( o.appearance );
  auto const f = load_netlist( o.function );
  auto const map = match_graphs( a, f, cfg.costs );
  auto const camo = deploy_covert( a, f, map );
  emit( g.out, to_json( camo ).dump( 2 ) + "\n" );
  auto s = camo_summary( camo, f, a, cfg );
  s["matched"] = map.pairs.size();
  std::cerr << s.dump( 2 ) << "\n";
  return ok;
}

int cmd_synth( globals const& g, camo_opts const& o )
{
  auto cfg = load_config( g );
  auto const a = load_netlist( o.appearance );
  auto const f = load_netlist( o.function );
  if ( a.pos().empty() || f.pos().empty() )
    throw input_failure( "both circuits need outputs" );
  if ( o.epochs )
    cfg.train.epochs = *o.epochs;
  cfg.train.seed = cfg.seed;
  auto const d = make_dataset( a, f, cfg.truth_cap, cfg.sample_n, derive_seed( cfg.seed, 0 ) );
  auto const res = train( d, default_shape( d.num_pis(), d.num_pos() ), cfg.train );
  auto const x = extract( res.net, d.ports );
  emit( g.out, to_json( x.camo ).dump( 2 ) + "\n" );
  if ( !o.trace.empty() )
    emit( o.trace, trace_csv( res.trace ) );
  if ( !o.checkpoint.empty() )
    emit( o.checkpoint, checkpoint_to_json( res.net, cfg.train.seed, res.best_epoch ).dump( 2 ) + "\n" );
  auto s = camo_summary( x.camo, f, a, cfg );
  s["acc_p0"] = res.refined_acc_p0;
  s["acc_p1"] = res.refined_acc_p1;
  s["best_epoch"] = res.best_epoch;
  s["refined"] = res.refined;
  s["violations"] = x.report.violations;
  s["violation_fraction"] = x.report.fraction();
  std::cerr << s.dump( 2 ) << "\n";
  return s["functional_accuracy"].get<double>() + 1e-9 >= cfg.accuracy_threshold ? ok : below_threshold;
}

struct evaluate_opts
{
  std::string camo, function, appearance, f1;
  bool resilience{ false };
  std::optional<double> threshold;
};

int cmd_evaluate( globals const& g, evaluate_opts const& o )
{
  auto const cfg = load_config( g );
  camouflaged_netlist camo;
  try
  {
    camo = camo_from_json( load_json( o.camo ) );
    check_cells( camo );
  }
  catch ( mimic_error const& e )
  {
    throw input_failure( o.camo + ": " + e.what() );
  }
  auto const f = load_netlist( o.function );
  nlohmann::json report;
  auto const seed = derive_seed( cfg.seed, 3 );
  auto const acc = functional_accuracy( camo, f, cfg.sample_n, seed );
  report["functional_accuracy"] = acc.percentage();
  report["accuracy_exhaustive"] = acc.exhaustive;
  report["overheads_vs_function"] = to_json( overheads( camo, f ) );
  if ( !o.appearance.empty() )
  {
    auto const a = load_netlist( o.appearance );
    report["appearance_fidelity"] = appearance_fidelity( camo, a );
    report["overheads_vs_appearance"] = to_json( overheads( camo, a ) );
  }
  if ( o.resilience )
  {
    try
    {
      report["resilience"] = to_json( decamo_resilience( camo, f, cfg.max_keys, cfg.sample_n, seed ) );
    }
    catch ( mimic_error const& e )
    {
      report["resilience"] = { { "refused", true }, { "reason", e.what() } };
    }
  }
  if ( !o.f1.empty() )
  {
    std::vector<f1_row> rows;
    try
    {
      rows = f1_rows_from_json( load_json( o.f1 ) );
    }
    catch ( mimic_error const& e )
    {
      throw input_failure( o.f1 + ": " + e.what() );
    }
    report["deception"] = to_json( check_scores( rows ) );
  }
  emit( g.out, report.dump( 2 ) + "\n" );
  return o.threshold && acc.percentage() + 1e-9 < *o.threshold ? below_threshold : ok;
}

struct pipeline_opts
{
  std::string function, appearance, method;
  std::optional<uint32_t> k, epochs;
  std::optional<double> threshold;
  bool resilience{ false };
};

int cmd_pipeline( globals const& g, pipeline_opts const& o )
{
  auto cfg = load_config( g );
  if ( !o.method.empty() )
  {
    try
    {
      cfg.method = method_from_string( o.method );
    }
    catch ( mimic_error const& e )
    {
      throw input_failure( e.what() );
    }
  }
  cfg.k = o.k.value_or( cfg.k );
  if ( o.epochs )
    cfg.train.epochs = *o.epochs;
  cfg.accuracy_threshold = o.threshold.value_or( cfg.accuracy_threshold );
  cfg.resilience = cfg.resilience || o.resilience;
  if ( !g.out.empty() )
    cfg.out_dir = g.out;
  if ( cfg.k == 0 )
    throw input_failure( "k must be positive" );
  auto const s = run_pipeline( o.function, o.appearance, cfg );
  if ( s.exit_code == 2 )
    throw input_failure( s.message );
  if ( s.exit_code == 3 )
  {
    std::cerr << "mimic: stage '" << s.failing_stage << "' failed: " << s.message << "\n";
    return internal_error;
  }
  std::cout << s.manifest["metrics"]["evaluation"].dump( 2 ) << "\n";
  if ( s.exit_code == 1 )
    std::cerr << "mimic: " << s.message << "\n";
  return s.exit_code;
}

} // namespace

int main( int argc, char** argv )
{
  CLI::App app{ "Camouflage a functional netlist behind the appearance of another" };
  app.require_subcommand( 1 );
  app.fallthrough();
  globals g;
  uint64_t seed = 1;
  auto* seed_opt = app.add_option( "--seed", seed, "Root seed for every random stage" );
  app.add_option( "--jobs", g.jobs, "Parallel piece jobs" )->check( CLI::PositiveNumber );
  app.add_option( "-o,--out-dir", g.out, "Output file, or output directory for pipeline" );
  app.add_option( "--config", g.config_path, "JSON config file" );

  std::string parse_in;
  auto* parse = app.add_subcommand( "parse", "Parse a .bench file and print its size; -o writes it back normalized" );
  parse->add_option( "input", parse_in )->required();

  partition_opts po;
  auto* part = app.add_subcommand( "partition", "Partition a netlist into k blocks" );
  part->add_option( "input", po.in )->required();
  part->add_option( "--k", po.k, "Number of blocks" );
  part->add_option( "--w-cut", po.w_cut, "Cut weight" );
  part->add_option( "--w-io", po.w_io, "I/O imbalance weight" );
  part->add_option( "--min-size", po.min_size, "Smallest block" );
  part->add_option( "--max-size", po.max_size, "Largest block, 0 for none" );

  camo_opts mo;
  auto* match = app.add_subcommand( "match", "Camouflage with the layer-wise graph matcher" );
  match->add_option( "--appearance", mo.appearance )->required();
  match->add_option( "--function", mo.function )->required();

  camo_opts so;
  auto* synth = app.add_subcommand( "synth-nand", "Camouflage with a trained NAND array" );
  synth->add_option( "--appearance", so.appearance )->required();
  synth->add_option( "--function", so.function )->required();
  synth->add_option( "--epochs", so.epochs );
  synth->add_option( "--trace", so.trace, "Training trace CSV" );
  synth->add_option( "--checkpoint", so.checkpoint, "Selector checkpoint JSON" );

  evaluate_opts eo;
  auto* eval = app.add_subcommand( "evaluate", "Score a camouflaged netlist" );
  eval->add_option( "--camo", eo.camo )->required();
  eval->add_option( "--function", eo.function )->required();
  eval->add_option( "--appearance", eo.appearance );
  eval->add_option( "--f1", eo.f1, "Attacker F1 rows for deception scores" );
  eval->add_flag( "--resilience", eo.resilience, "Brute-force key enumeration" );
  eval->add_option( "--threshold", eo.threshold, "Exit 1 below this accuracy" );

  pipeline_opts pl;
  auto* pipe = app.add_subcommand( "pipeline", "Partition, camouflage and recombine" );
  pipe->add_option( "--function", pl.function )->required();
  pipe->add_option( "--appearance", pl.appearance )->required();
  pipe->add_option( "--method", pl.method, "graph_match or nand_array" );
  pipe->add_option( "--k", pl.k, "Pieces per circuit" );
  pipe->add_option( "--epochs", pl.epochs );
  pipe->add_option( "--threshold", pl.threshold, "Minimum functional accuracy" );
  pipe->add_flag( "--resilience", pl.resilience, "Brute-force key enumeration" );

  try
  {
    app.parse( argc, argv );
  }
  catch ( CLI::CallForHelp const& e )
  {
    return app.exit( e );
  }
  catch ( CLI::CallForAllHelp const& e )
  {
    return app.exit( e );
  }
  catch ( CLI::CallForVersion const& e )
  {
    return app.exit( e );
  }
  catch ( CLI::ParseError const& e )
  {
    app.exit( e );
    return input_error;
  }
  if ( seed_opt->count() )
    g.seed = seed;

  try
  {
    if ( *parse )
      return cmd_parse( g, parse_in );
    if ( *part )
      return cmd_partition( g, po );
    if ( *match )
      return cmd_match( g, mo );
    if ( *synth )
      return cmd_synth( g, so );
    if ( *eval )
      return cmd_evaluate( g, eo );
    return cmd_pipeline( g, pl );
  }
  catch ( input_failure const& e )
  {
    std::cerr << "mimic: " << e.what() << "\n";
    return input_error;
  }
  catch ( std::exception const& e )
  {
    std::cerr << "mimic: internal error: " << e.what() << "\n";
    return internal_error;
  }
}
