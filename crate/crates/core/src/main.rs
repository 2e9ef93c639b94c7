fn main() {
    std::process::exit(canon_gnn::cli::run());
}
