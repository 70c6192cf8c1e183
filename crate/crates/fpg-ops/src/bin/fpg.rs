fn main() {
    std::process::exit(fpg_ops::harness::cli_entry(std::env::args().skip(1)));
}
