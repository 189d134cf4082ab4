import os


class Settings:
    PROJECT_NAME: str = "OU Euler Hermite-Galerkin Toolkit"
    PROJECT_VERSION: str = "1.0.0"
    OUTPUT_DIR: str = os.getenv("OUE_OUTPUT_DIR", "./runs")
    DATABASE_URL: str = os.getenv("OUE_DATABASE_URL", "")
    LOG_LEVEL: str = os.getenv("OUE_LOG_LEVEL", "INFO")
    TABLE_BUDGET_MB: float = float(os.getenv("OUE_TABLE_BUDGET_MB", "512"))
    # Fixed chunk sizes keep results independent of the worker count
    SAMPLE_BLOCK: int = 4096
    FLOW_BATCH: int = 256

    @property
    def threads(self) -> int:
        value = os.getenv("OUE_THREADS")
        if value:
            return max(1, int(value))
        return os.cpu_count() or 1


settings = Settings()
