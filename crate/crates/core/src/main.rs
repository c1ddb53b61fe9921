fn main() {
    std::process::exit(patchseg::cli::run());
}
