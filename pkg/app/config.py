from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Application configuration
    app_title: str = "purestate"
    app_version: str = "0.1.0"
    debug: bool = False

    # Concurrency
    threads: int = 1  # PURESTATE_THREADS, caps trajectory fan-out

    # Operator storage
    dense_operator_max_dim: int = 32

    # Time stepping
    direct_solve_max_dim: int = 4096  # largest N^2 factorized directly
    dense_solve_max_dim: int = 400  # largest N^2 factorized as a dense matrix
    solve_rtol: float = 1e-12
    gmres_restart: int = 50

    # Adjoint forward-state storage
    memory_budget_gib: float = 4.0

    # Checks
    verify_basis_max_dim: int = 16
    gradcheck_tol: float = 1e-6

    model_config = SettingsConfigDict(
        env_prefix="PURESTATE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )


settings = Settings()
