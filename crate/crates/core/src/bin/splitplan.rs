fn main() {
    std::process::exit(splitplan::cli::main())
}
