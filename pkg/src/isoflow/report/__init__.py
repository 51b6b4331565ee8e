from .convergence import ErrorReport, ErrorRow, eoc
from .diagnostics import Diagnostic, check_records, read_step_csv, write_step_csv
from .export import export_vtk, read_vtk
