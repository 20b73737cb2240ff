fn main() {
    std::process::exit(navgeom_cli::cli::run());
}
