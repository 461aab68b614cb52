#include <catch_amalgamated.hpp>

#include <cmath>

#include <mimic/bench.hpp>
#include <mimic/covert.hpp>
#include <mimic/simulate.hpp>
#include <mimic/tnet.hpp>

#include "support.hpp"

using namespace mimic;
using Catch::Approx;

namespace
{

/* slot s of `theta` one-hot on candidate c with the given logit margin (theta0 dummies stay pinned) */
void set_pick( selector_net& net, std::vector<double>& theta, uint32_t s, uint32_t c, double margin = 50.0 )
{
  auto const off = net.slot_offset( s );
  for ( uint32_t i = 0; i < net.slot_width( s ); ++i )
    theta[off + i] = i == c ? margin : 0.0;
  net.pin_dummies();
}

/* logits giving exactly the probabilities `w` at tau = 1; zero probability maps to a very low logit */
void set_probs( selector_net& net, std::vector<double>& theta, uint32_t s, std::vector<double> const& w )
{
  auto const off = net.slot_offset( s );
  REQUIRE( w.size() == net.slot_width( s ) );
  for ( uint32_t i = 0; i < w.size(); ++i )
    theta[off + i] = w[i] > 0 ? std::log( w[i] ) : -1000.0;
}

/* one NAND over two inputs: layers {1}, PO reads the node */
selector_net nand_net()
{
  selector_net net( { 2, 1, { 1 } } );
  set_pick( net, net.theta0, 0, 0 );
  set_pick( net, net.theta0, 1, 1 );
  set_pick( net, net.theta0, 2, 2 );
  net.theta1 = net.theta0;
  return net;
}

selector_net random_net( net_shape const& shape, uint64_t seed, double scale = 1.0 )
{
  auto net = init_net( shape, scale, seed );
  random_source rng( derive_seed( seed, 9 ) );
  for ( auto& x : net.theta1 )
    x += scale * rng.normal();
  net.tau = 0.5 + rng.uniform();
  return net;
}

std::vector<mimicry_row> random_rows( selector_net const& net, uint32_t n, uint64_t seed )
{
  random_source rng( seed );
  std::vector<mimicry_row> rows;
  for ( uint32_t r = 0; r < n; ++r )
  {
    mimicry_row row;
    row.p = r % 2 ? 1.0 : 0.0;
    for ( uint32_t i = 0; i < net.num_pis(); ++i )
      row.in.push_back( static_cast<double>( rng.below( 2 ) ) );
    for ( uint32_t o = 0; o < net.num_pos(); ++o )
    {
      row.target.push_back( static_cast<double>( rng.below( 2 ) ) );
      row.mask.push_back( rng.uniform() < 0.8 ? 1 : 0 );
    }
    row.mask[0] = 1;
    rows.push_back( row );
  }
  return rows;
}

netlist single_nand()
{
  netlist n;
  auto const a = n.add_input( "a" );
  auto const b = n.add_input( "b" );
  n.add_output( n.add_gate( "y", gate_type::nand, { a, b } ) );
  return n;
}

} // namespace

TEST_CASE( "effective parameters interpolate the two sets", "[selector]" )
{
  std::vector<double> const t0{ 0.0, -1.0, 3.0 }, t1{ 2.0, 5.0, 3.0 };
  CHECK( effective_params( t0, t1, 1.0 ) == t1 );
  CHECK( effective_params( t0, t1, 0.0 ) == t0 );
  auto const mid = effective_params( t0, t1, 0.5 );
  CHECK( mid[0] == 1.0 );
  CHECK( mid[1] == 2.0 );
  CHECK( mid[2] == 3.0 );
  std::vector<double> const short_set{ 1.0 };
  CHECK_THROWS_AS( effective_params( t0, short_set, 0.5 ), mimic_error );
}

TEST_CASE( "net shape gives triangular candidate sets", "[selector]" )
{
  selector_net net( { 3, 2, { 2, 1 } } );
  CHECK( net.num_nodes() == 3 );
  CHECK( net.num_slots() == 8 );
  CHECK( net.slot_size( 0 ) == 3 );
  CHECK( net.slot_size( 3 ) == 3 );
  CHECK( net.slot_size( 4 ) == 5 );
  CHECK( net.slot_size( 6 ) == 6 );
  CHECK( net.slot_size( 7 ) == 6 );
  CHECK( net.slot_width( 1 ) == 4 );
  CHECK( net.slot_width( 0 ) == 3 );
  CHECK( net.slot_width( 6 ) == 6 );
  CHECK( net.signal_layer( 2 ) == 0 );
  CHECK( net.signal_layer( 4 ) == 1 );
  CHECK( net.signal_layer( 5 ) == 2 );
  CHECK_THROWS_AS( selector_net( { 2, 0, { 1 } } ), mimic_error );
  CHECK_THROWS_AS( selector_net( { 2, 1, { 1, 0 } } ), mimic_error );

  auto const shape = default_shape( 5, 2 );
  CHECK( shape.layers == std::vector<uint32_t>{ 10, 10, 5, 5 } );
  uint32_t total = 0;
  for ( auto w : default_shape( 100, 1 ).layers )
    total += w;
  CHECK( total <= 256 );
}

TEST_CASE( "selector weights sum to one", "[selector]" )
{
  auto const net = random_net( { 3, 2, { 4, 3 } }, 3 );
  random_source rng( 5 );
  for ( auto mode : { select_mode::soft, select_mode::gumbel, select_mode::hard } )
  {
    auto const w = slot_weights( net, net.theta1, mode, &rng );
    for ( uint32_t s = 0; s < net.num_slots(); ++s )
    {
      double sum = 0;
      for ( uint32_t i = 0; i < net.slot_width( s ); ++i )
        sum += w[net.slot_offset( s ) + i];
      CHECK( sum == Approx( 1.0 ).margin( 1e-6 ) );
    }
  }
}

TEST_CASE( "hard forward computes NAND", "[selector]" )
{
  auto const net = nand_net();
  CHECK( forward_hard( net, { true, true }, 1.0 ) == std::vector<bool>{ false } );
  CHECK( forward_hard( net, { false, true }, 1.0 ) == std::vector<bool>{ true } );
  CHECK( forward_hard( net, { false, false }, 0.0 ) == std::vector<bool>{ true } );
  CHECK( forward_hard( net, { true, false }, 0.0 ) == std::vector<bool>{ true } );
  std::vector<double> const three{ 1.0, 0.0, 1.0 };
  CHECK_THROWS_AS( forward( net, three, 1.0, select_mode::soft ), mimic_error );
}

TEST_CASE( "dummy candidate turns a node into NOT", "[selector]" )
{
  auto net = nand_net();
  set_pick( net, net.theta1, 1, net.slot_size( 1 ) );
  CHECK( forward_hard( net, { true, false }, 1.0 ) == std::vector<bool>{ false } );
  CHECK( forward_hard( net, { false, true }, 1.0 ) == std::vector<bool>{ true } );
  /* theta0 never sees the dummy */
  CHECK( forward_hard( net, { true, false }, 0.0 ) == std::vector<bool>{ true } );
}

TEST_CASE( "soft NAND of halves is 0.75", "[selector]" )
{
  auto const net = nand_net();
  std::vector<double> const in{ 0.5, 0.5 };
  auto const out = forward( net, in, 1.0, select_mode::soft );
  CHECK( out[0] == Approx( 0.75 ).margin( 1e-12 ) );
}

TEST_CASE( "gumbel selection at low temperature matches the noisy argmax", "[selector]" )
{
  for ( uint64_t seed = 1; seed <= 10; ++seed )
  {
    auto net = random_net( { 3, 2, { 3, 2 } }, seed );
    net.tau = 1e-3;
    /* oracle: replay the noise stream, take the argmax per slot */
    random_source rng( 77 + seed );
    auto const eff = effective_params( net.theta0, net.theta1, 1.0 );
    std::vector<double> w( net.num_params(), 0.0 );
    for ( uint32_t s = 0; s < net.num_slots(); ++s )
    {
      auto const off = net.slot_offset( s );
      uint32_t best = 0;
      double best_z = -1e300;
      for ( uint32_t i = 0; i < net.slot_width( s ); ++i )
      {
        auto const z = eff[off + i] + rng.gumbel();
        if ( z > best_z )
        {
          best_z = z;
          best = i;
        }
      }
      w[off + best] = 1.0;
    }
    random_source bits( seed );
    for ( int r = 0; r < 8; ++r )
    {
      std::vector<double> in{ double( bits.below( 2 ) ), double( bits.below( 2 ) ), double( bits.below( 2 ) ) };
      auto const expected = forward_weights( net, w, in );
      auto const got = forward( net, in, 1.0, select_mode::gumbel, 77 + seed );
      for ( std::size_t o = 0; o < got.size(); ++o )
        CHECK( got[o] == Approx( expected[o] ).margin( 1e-6 ) );
    }
  }
}

TEST_CASE( "hardness loss", "[selector]" )
{
  std::vector<double> const bits{ 0.0, 1.0, 1.0, 0.0 };
  CHECK( loss_hardness( bits, bits, 2.0 ) == Approx( 0.0 ).margin( 1e-9 ) );
  std::vector<double> const half( 4, 0.5 );
  CHECK( loss_hardness( half, bits, 0.0 ) == Approx( std::log( 2.0 ) ).epsilon( 1e-12 ) );
  double prev = -1;
  for ( double e = 0.0; e < 0.99; e += 0.05 )
  {
    auto const l = hardness_term( e, 0.0, 2.0 );
    CHECK( l > prev );
    prev = l;
    CHECK( hardness_term( 1.0 - e, 1.0, 2.0 ) == Approx( l ) );
  }
  std::vector<double> const one{ 0.5 };
  CHECK_THROWS_AS( loss_hardness( one, bits, 2.0 ), mimic_error );
}

TEST_CASE( "hardness gradient matches finite differences", "[selector]" )
{
  for ( double t : { 0.0, 1.0 } )
  {
    for ( double y = 0.05; y < 0.99; y += 0.1 )
    {
      auto const h = 1e-6;
      auto const fd = ( hardness_term( y + h, t, 2.0 ) - hardness_term( y - h, t, 2.0 ) ) / ( 2 * h );
      CHECK( hardness_grad( y, t, 2.0 ) == Approx( fd ).epsilon( 1e-5 ) );
    }
  }
}

TEST_CASE( "skip-connection regularizer", "[selector]" )
{
  /* 3 layers of one node: max gap 2 */
  selector_net net( { 2, 1, { 1, 1, 1 } } );
  auto prev_layer = [&]( std::vector<double>& th ) {
    set_pick( net, th, 0, 0 );
    set_pick( net, th, 1, 1 );
    set_pick( net, th, 2, 2 );
    set_pick( net, th, 3, 2 );
    set_pick( net, th, 4, 3 );
    set_pick( net, th, 5, 3 );
    set_pick( net, th, 6, 4 );
  };
  prev_layer( net.theta0 );
  CHECK( loss_reg( net, net.theta0 ) == Approx( 0.0 ).margin( 1e-12 ) );

  /* deepest node's first slot on a PI: that slot contributes 1, averaged over 6 slots */
  set_pick( net, net.theta0, 4, 0 );
  CHECK( loss_reg( net, net.theta0 ) == Approx( 1.0 / 6 ).epsilon( 1e-9 ) );

  /* uniform over gaps {0, 1}: expected gap 0.5, normalized by 2 */
  prev_layer( net.theta0 );
  set_probs( net, net.theta0, 4, { 0.0, 0.0, 0.5, 0.5 } );
  CHECK( loss_reg( net, net.theta0 ) == Approx( 0.25 / 6 ).epsilon( 1e-9 ) );

  /* the dummy has gap 0 */
  prev_layer( net.theta1 );
  set_pick( net, net.theta1, 5, net.slot_size( 5 ) );
  CHECK( loss_reg( net, net.theta1 ) == Approx( 0.0 ).margin( 1e-12 ) );
}

TEST_CASE( "cryptic loss", "[selector]" )
{
  auto net = random_net( { 2, 1, { 2 } }, 11 );
  net.theta1 = net.theta0;
  CHECK( loss_cryptic( net ) == 0.0 );

  net.tau = 1.0;
  /* PO slot 4 over candidates {a, b, n0, n1} */
  set_probs( net, net.theta0, 4, { 0.3, 0.2, 0.25, 0.25 } );
  net.theta1 = net.theta0;
  set_probs( net, net.theta1, 4, { 0.8, 0.2, 0.0, 0.0 } );
  CHECK( loss_cryptic( net ) == Approx( 0.5 ).epsilon( 1e-9 ) );

  /* mass moved onto the dummy is free: p1=0.3 against p0=0.8 contributes nothing */
  net.theta1 = net.theta0;
  set_probs( net, net.theta0, 1, { 0.8, 0.2, 0.0 } );
  set_probs( net, net.theta1, 1, { 0.3, 0.2, 0.5 } );
  net.pin_dummies();
  CHECK( loss_cryptic( net ) == Approx( 0.0 ).margin( 1e-12 ) );
  /* the reverse moves 0.5 onto a real candidate */
  selector_net rev( { 2, 1, { 2 } } );
  rev.theta1 = rev.theta0;
  set_probs( rev, rev.theta0, 1, { 0.3, 0.7, 0.0 } );
  set_probs( rev, rev.theta1, 1, { 0.8, 0.2, 0.0 } );
  CHECK( loss_cryptic( rev ) == Approx( 0.5 ).epsilon( 1e-9 ) );
}

TEST_CASE( "total loss degenerates to the hardness term", "[selector]" )
{
  auto const net = random_net( { 3, 2, { 3, 2 } }, 21 );
  auto const rows = random_rows( net, 12, 4 );
  train_config cfg;
  cfg.lambda_reg = 0;
  cfg.lambda_cryptic = 0;
  auto const lb = total_loss( net, rows, cfg, select_mode::soft );
  /* oracle: mean of the per-bit term over counted bits */
  double sum = 0;
  uint32_t bits = 0;
  for ( auto const& r : rows )
  {
    auto const out = forward( net, r.in, r.p, select_mode::soft );
    for ( uint32_t o = 0; o < out.size(); ++o )
    {
      if ( !r.mask[o] )
        continue;
      sum += hardness_term( out[o], r.target[o], cfg.hardness_gamma );
      ++bits;
    }
  }
  CHECK( lb.hardness == Approx( sum / bits ).epsilon( 1e-12 ) );
  CHECK( lb.total == Approx( lb.hardness ).epsilon( 1e-12 ) );

  train_config full;
  auto const lf = total_loss( net, rows, full, select_mode::soft );
  CHECK( lf.total == Approx( lf.hardness + full.lambda_reg * lf.reg + full.lambda_cryptic * lf.cryptic ).epsilon( 1e-12 ) );
}

TEST_CASE( "perfect net has zero total loss", "[selector]" )
{
  auto net = nand_net();
  /* theta1 keeps its dummy below the real pick, so it stays dominated */
  std::vector<mimicry_row> rows;
  for ( int p = 0; p < 2; ++p )
  {
    for ( int a = 0; a < 2; ++a )
    {
      for ( int b = 0; b < 2; ++b )
        rows.push_back( { double( p ), { double( a ), double( b ) }, { double( !( a && b ) ) }, { 1 } } );
    }
  }
  auto const lb = total_loss( net, rows, train_config{}, select_mode::soft );
  CHECK( lb.total == Approx( 0.0 ).margin( 1e-9 ) );
  CHECK( lb.reg == 0.0 );
  CHECK( lb.cryptic == Approx( 0.0 ).margin( 1e-12 ) );
}

TEST_CASE( "total loss gradients match central differences", "[selector]" )
{
  std::vector<net_shape> const shapes{ { 2, 1, { 1 } }, { 2, 1, { 2 } }, { 2, 2, { 1, 1 } }, { 3, 1, { 2, 1 } }, { 2, 1, { 1, 1, 1 } }, { 3, 2, { 2, 2 } } };
  train_config cfg;
  cfg.lambda_reg = 0.7;
  cfg.lambda_cryptic = 3.0;
  uint64_t seed = 100;
  for ( auto const& shape : shapes )
  {
    auto net = random_net( shape, ++seed, 1.5 );
    auto const rows = random_rows( net, 10, seed );
    std::vector<double> g0, g1;
    total_loss( net, rows, cfg, select_mode::soft, 0, &g0, &g1 );
    double worst = 0;
    for ( int set = 0; set < 2; ++set )
    {
      auto& th = set ? net.theta1 : net.theta0;
      auto const& g = set ? g1 : g0;
      for ( std::size_t i = 0; i < th.size(); ++i )
      {
        if ( !set && th[i] == selector_net::dummy_off )
        {
          CHECK( g[i] == 0.0 );
          continue;
        }
        constexpr double eps = 1e-5;
        auto const x = th[i];
        th[i] = x + eps;
        auto const up = total_loss( net, rows, cfg, select_mode::soft ).total;
        th[i] = x - eps;
        auto const down = total_loss( net, rows, cfg, select_mode::soft ).total;
        th[i] = x;
        auto const fd = ( up - down ) / ( 2 * eps );
        auto const scale = std::max( { std::abs( fd ), std::abs( g[i] ), 1e-4 } );
        worst = std::max( worst, std::abs( fd - g[i] ) / scale );
      }
    }
    INFO( "shape with " << net.num_params() << " logits per set" );
    CHECK( worst < 1e-4 );
  }
}

TEST_CASE( "hard forward depends only on the selected parameter set", "[selector]" )
{
  for ( uint64_t seed = 1; seed <= 5; ++seed )
  {
    auto const net = random_net( { 3, 2, { 4, 2 } }, seed );
    auto perturbed0 = net, perturbed1 = net;
    random_source rng( seed * 13 );
    for ( auto& x : perturbed0.theta0 )
      x += 3 * rng.normal();
    perturbed0.pin_dummies();
    for ( auto& x : perturbed1.theta1 )
      x += 3 * rng.normal();
    for ( uint32_t row = 0; row < 8; ++row )
    {
      std::vector<bool> in{ bool( row & 1 ), bool( row & 2 ), bool( row & 4 ) };
      CHECK( forward_hard( perturbed0, in, 1.0 ) == forward_hard( net, in, 1.0 ) );
      CHECK( forward_hard( perturbed1, in, 0.0 ) == forward_hard( net, in, 0.0 ) );
    }
  }
}

TEST_CASE( "saturated soft forward agrees with hard forward", "[selector]" )
{
  for ( uint64_t seed = 1; seed <= 5; ++seed )
  {
    selector_net net( { 3, 2, { 4, 3, 2 } } );
    net.tau = 1.0;
    random_source rng( seed );
    for ( auto* th : { &net.theta0, &net.theta1 } )
    {
      for ( uint32_t s = 0; s < net.num_slots(); ++s )
        set_pick( net, *th, s, static_cast<uint32_t>( rng.below( th == &net.theta0 ? net.slot_size( s ) : net.slot_width( s ) ) ), 20.0 );
    }
    for ( double p : { 0.0, 1.0 } )
    {
      for ( uint32_t row = 0; row < 8; ++row )
      {
        std::vector<double> in{ double( row & 1 ), double( ( row >> 1 ) & 1 ), double( ( row >> 2 ) & 1 ) };
        auto const soft = forward( net, in, p, select_mode::soft );
        auto const hard = forward( net, in, p, select_mode::hard );
        for ( std::size_t o = 0; o < soft.size(); ++o )
          CHECK( soft[o] == Approx( hard[o] ).margin( 1e-6 ) );
      }
    }
  }
}

TEST_CASE( "zero cryptic loss leaves no containment violation", "[selector]" )
{
  for ( uint64_t seed = 1; seed <= 20; ++seed )
  {
    auto net = random_net( { 3, 2, { 4, 3 } }, seed, 2.0 );
    /* theta1 = theta0 up to a per-slot shift, with any dummy logits */
    random_source rng( seed + 500 );
    net.theta1 = net.theta0;
    for ( uint32_t s = 0; s < net.num_slots(); ++s )
    {
      auto const shift = rng.normal();
      for ( uint32_t i = 0; i < net.slot_size( s ); ++i )
        net.theta1[net.slot_offset( s ) + i] += shift;
      if ( net.has_dummy( s ) )
        net.theta1[net.dummy_index( s )] = 3 * rng.normal();
    }
    REQUIRE( loss_cryptic( net ) == Approx( 0.0 ).margin( 1e-12 ) );
    CHECK( containment( net ).violations == 0 );
  }
  /* and a violation costs something */
  auto net = nand_net();
  set_pick( net, net.theta1, 0, 1 );
  set_pick( net, net.theta1, 1, 0 );
  set_pick( net, net.theta1, 2, 0 );
  CHECK( loss_cryptic( net ) > 0.5 );
  CHECK( containment( net ).violations > 0 );
}

TEST_CASE( "unified dataset for c17 and mux_4", "[selector]" )
{
  auto const a = test::load( "mux_4.bench" );
  auto const f = test::load( "c17.bench" );
  auto const d = make_dataset( a, f );
  CHECK( d.ports.pi_names == std::vector<std::string>{ "1", "2", "3", "6", "7", "s1" } );
  CHECK( d.ports.po_names == std::vector<std::string>{ "22", "23" } );
  CHECK( d.rows.size() == 64 + 32 );
  CHECK( d.exhaustive_p0 );
  CHECK( d.exhaustive_p1 );
  auto const tf = compute_truth_table( f );
  uint32_t f_rows = 0;
  for ( auto const& r : d.rows )
  {
    if ( r.p == 0.0 )
    {
      CHECK( r.mask == std::vector<uint8_t>{ 1, 0 } );
      continue;
    }
    CHECK( r.in[5] == 0.0 );
    CHECK( r.mask == std::vector<uint8_t>{ 1, 1 } );
    uint64_t idx = 0;
    for ( uint32_t i = 0; i < 5; ++i )
      idx |= uint64_t( r.in[i] > 0.5 ) << i;
    CHECK( ( r.target[0] > 0.5 ) == tf.get( idx, 0 ) );
    CHECK( ( r.target[1] > 0.5 ) == tf.get( idx, 1 ) );
    ++f_rows;
  }
  CHECK( f_rows == 32 );
}

TEST_CASE( "single NAND trains to full accuracy", "[selector]" )
{
  auto const d = make_dataset( single_nand(), single_nand() );
  train_config cfg;
  cfg.epochs = 200;
  cfg.refine_iterations = 0;
  cfg.seed = 3;
  auto const r = train( d, default_shape( 2, 1 ), cfg );
  REQUIRE( !r.diverged );
  CHECK( r.trace.size() == 201 );
  CHECK( r.trace[r.best_epoch].acc_p0 == 100.0 );
  CHECK( r.trace[r.best_epoch].acc_p1 == 100.0 );
  CHECK( hard_accuracy( r.net, d, 0.0 ) == 100.0 );
  CHECK( hard_accuracy( r.net, d, 1.0 ) == 100.0 );

  auto const x = extract( r.net, d.ports );
  auto const fv = function_view( x.camo );
  CHECK( compute_truth_table( fv ) == compute_truth_table( single_nand() ) );
  for ( auto const* v : { &fv } )
  {
    for ( auto const& n : v->nodes() )
      CHECK( ( n.type == gate_type::nand || n.type == gate_type::input ) );
  }
}

TEST_CASE( "zero epochs return the initialization", "[selector]" )
{
  auto const d = make_dataset( single_nand(), single_nand() );
  train_config cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  auto const shape = default_shape( 2, 1 );
  auto const r = train( d, shape, cfg );
  auto const init = init_net( shape, cfg.init_scale, derive_seed( cfg.seed, 0 ) );
  CHECK( r.net.theta0 == init.theta0 );
  CHECK( r.net.theta1 == init.theta1 );
  CHECK( r.trace.size() == 1 );
  CHECK( r.best_epoch == 0 );
}

TEST_CASE( "training is deterministic", "[selector]" )
{
  auto const d = make_dataset( test::load( "mux_4.bench" ), test::load( "c17.bench" ) );
  train_config cfg;
  cfg.epochs = 60;
  cfg.refine_iterations = 20000;
  cfg.seed = 5;
  auto const shape = default_shape( d.num_pis(), d.num_pos() );
  auto const a = train( d, shape, cfg );
  auto const b = train( d, shape, cfg );
  REQUIRE( a.trace.size() == b.trace.size() );
  for ( std::size_t i = 0; i < a.trace.size(); ++i )
  {
    CHECK( a.trace[i].loss.total == b.trace[i].loss.total );
    CHECK( a.trace[i].acc_p0 == b.trace[i].acc_p0 );
    CHECK( a.trace[i].acc_p1 == b.trace[i].acc_p1 );
  }
  CHECK( a.net.theta0 == b.net.theta0 );
  CHECK( a.net.theta1 == b.net.theta1 );
  CHECK( trace_csv( a.trace ) == trace_csv( b.trace ) );
}

TEST_CASE( "invalid configurations are rejected", "[selector]" )
{
  auto const d = make_dataset( single_nand(), single_nand() );
  train_config cfg;
  cfg.tau_end = 2.0;
  CHECK_THROWS_AS( train( d, default_shape( 2, 1 ), cfg ), mimic_error );
  cfg = {};
  cfg.lambda_reg = -1;
  CHECK_THROWS_AS( train( d, default_shape( 2, 1 ), cfg ), mimic_error );
  CHECK_THROWS_AS( train( d, default_shape( 3, 1 ), train_config{} ), mimic_error );
}

TEST_CASE( "refinement keeps containment and never loses accuracy", "[selector]" )
{
  auto const d = make_dataset( test::load( "mux_4.bench" ), test::load( "c17.bench" ) );
  for ( uint64_t seed = 1; seed <= 3; ++seed )
  {
    auto net = init_net( default_shape( d.num_pis(), d.num_pos() ), 1.0, seed );
    auto const before = std::min( hard_accuracy( net, d, 0.0 ), hard_accuracy( net, d, 1.0 ) );
    auto copy = net;
    auto const r = refine( net, d, 50000, seed );
    CHECK( std::min( r.acc_p0, r.acc_p1 ) >= before );
    CHECK( r.acc_p0 == hard_accuracy( net, d, 0.0 ) );
    CHECK( r.acc_p1 == hard_accuracy( net, d, 1.0 ) );
    if ( r.improved )
      CHECK( containment( net, d.ports ).violations == 0 );
    refine( copy, d, 50000, seed );
    CHECK( copy.theta0 == net.theta0 );
    CHECK( copy.theta1 == net.theta1 );
  }
}

TEST_CASE( "identical one-hot sets extract identical views", "[selector]" )
{
  selector_net net( { 3, 2, { 3, 2 } } );
  random_source rng( 4 );
  for ( uint32_t s = 0; s < net.num_slots(); ++s )
    set_pick( net, net.theta0, s, static_cast<uint32_t>( rng.below( net.slot_size( s ) ) ) );
  net.theta1 = net.theta0;
  auto const x = extract( net );
  CHECK( x.report.violations == 0 );
  auto const av = appearance_view( x.camo );
  auto const fv = function_view( x.camo );
  CHECK( isomorphic_by_name( av, fv ) );
  for ( auto const& n : av.nodes() )
    CHECK( ( n.type == gate_type::nand || n.type == gate_type::input ) );
}

TEST_CASE( "extracted views follow the hard forward pass", "[selector]" )
{
  auto const d = make_dataset( test::load( "mux_4.bench" ), test::load( "c17.bench" ) );
  train_config cfg;
  cfg.epochs = 100;
  cfg.refine_iterations = 100000;
  auto const r = train( d, default_shape( d.num_pis(), d.num_pos() ), cfg );
  auto const x = extract( r.net, d.ports );
  CHECK( x.report.violations == 0 );
  auto const fv = function_view( x.camo );
  auto const av = appearance_view( x.camo );
  for ( auto const* v : { &fv, &av } )
  {
    for ( auto const& n : v->nodes() )
      CHECK( ( n.type == gate_type::nand || n.type == gate_type::input ) );
  }
  /* the function view reproduces the p = 1 hard outputs on every row */
  for ( auto const& row : d.rows )
  {
    if ( row.p != 1.0 )
      continue;
    std::vector<bool> in( row.in.begin(), row.in.end() );
    auto const expect = forward_hard( r.net, in, 1.0 );
    auto const got = simulate( fv, in );
    CHECK( got == expect );
  }
}

TEST_CASE( "checkpoints round-trip", "[selector]" )
{
  auto const net = random_net( { 3, 2, { 4, 2 } }, 8 );
  auto const j = checkpoint_to_json( net, 8, 42 );
  auto const back = checkpoint_from_json( nlohmann::json::parse( j.dump() ) );
  CHECK( back.shape() == net.shape() );
  CHECK( back.theta0 == net.theta0 );
  CHECK( back.theta1 == net.theta1 );
  CHECK( back.tau == net.tau );
  CHECK( j.at( "epoch" ) == 42 );
  auto bad = j;
  bad["theta0"] = std::vector<double>{ 1.0 };
  CHECK_THROWS_AS( checkpoint_from_json( bad ), mimic_error );
  CHECK_THROWS_AS( checkpoint_from_json( nlohmann::json::object() ), mimic_error );
}
