//! Checkerboard generator, CSV ingestion, node partitioning and stratified splits.

mod checkerboard;
mod csv_io;
mod partition;

pub use checkerboard::{cell_center, cell_label, cell_of, gen_checkerboard, CheckerboardSpec, CELL, GRID};
pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use partition::{partition, train_test_split, PartitionPlan, PartitionStrategy};
