from app.reporting.artifacts import (
    RunDirectory,
    export_kernel_csv,
    plot_polygon,
    plot_series,
    plot_trajectory,
    report_text,
    sha256_of,
    trajectory_frame,
    write_csv,
    write_manifest,
)

__all__ = [
    "RunDirectory",
    "export_kernel_csv",
    "plot_polygon",
    "plot_series",
    "plot_trajectory",
    "report_text",
    "sha256_of",
    "trajectory_frame",
    "write_csv",
    "write_manifest",
]
