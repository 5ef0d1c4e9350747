pub mod netlist;
pub mod switch;
pub mod fsm;
pub mod lock;
pub mod sat;
pub mod attack;
pub mod harness;
pub mod fixtures;
