# config.py
"""
統一管理所有設定值，包含環境變數、數值容差、模擬預設值以及繪圖常數。
"""
import os
from dotenv import load_dotenv

# 在本地開發時，從 .env 檔案載入環境變數
load_dotenv()

APP_VERSION = "1.0.0"

# --- Runtime Settings ---
SCQ_THREADS = int(os.environ.get('SCQ_THREADS', '0'))  # 0 表示沿用設定檔
DEFAULT_OUTPUT_DIR = os.environ.get('SCQ_OUTPUT_DIR', 'results')
LOG_LEVEL = os.environ.get('SCQ_LOG_LEVEL', 'INFO')
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(process)d - %(module)s - %(message)s'

# --- Local Data File Paths ---
LOCAL_DATA_DIR = os.path.dirname(__file__)
FIGURE_GRIDS_FILE = os.path.join(LOCAL_DATA_DIR, 'figure_grids.json')
CONFIG_SCHEMA_VERSION = 1

# --- Fock Space ---
CUTOFF_SPREAD = 8.0      # N ≥ n̄ + 8√(n̄+1) + 20
CUTOFF_MARGIN = 20
CUTOFF_TAIL_AMPLITUDE = 1e-10   # 壓縮尾端在截斷處的振幅上限
UNITARITY_TOL = 1e-8
HERMITIAN_TOL = 1e-10
EXPM_MAX_NORM = 50.0

# --- Master Equation Engine ---
DEFAULT_REL_TOL = 1e-6
DEFAULT_ABS_TOL = 1e-9
DEFAULT_SAMPLE_COUNT = 101
DEFAULT_METHOD = "dopri5"
EVOLUTION_METHODS = ("dopri5", "propagator", "auto")
PROPAGATOR_MAX_DIM = 64
TRACE_WARN_TOL = 1e-8
TRACE_ABORT_TOL = 1e-6
POSITIVITY_WARN_TOL = -1e-8
POSITIVITY_ABORT_TOL = -1e-6
STEP_SAFETY = 0.9
STEP_MIN_FACTOR = 0.2
STEP_MAX_FACTOR = 5.0
STEP_UNDERFLOW_RATIO = 1e-12   # h < ratio·t_final 視為剛性崩潰
MAX_STEPS = 5_000_000

# --- Logical Observables ---
Q_MAX_DEFAULT = 20
SERIES_TOL = 1e-14

# --- Rate Fitting ---
RATE_FLOOR = 1e-13
FIT_WINDOW = (0.05, 1.0)
FIT_WINDOW_SLACK = 1e-9
TRANSIENT_FACTOR = 10.0   # t0 = 10·t_conf
HORIZON_DECAYS = 20.0
HORIZON_CAP = 2000.0
SUPPRESSION_RANGE = (2.0, 5.0)
MIN_FIT_POINTS = 3

# --- Scenario Defaults (rates in units of κ₂) ---
SCENARIO_DEFAULTS = {
    "rates-loss":      {"knob": "kappa_minus", "kappa1": 1e-3, "n_th": 0.0, "kappa_phi": 0.0, "kerr": 0.0},
    "rates-dephasing": {"knob": "kappa_phi",   "kappa1": 5e-3, "n_th": 0.0, "kappa_phi": 0.0, "kerr": 0.0},
    "rates-gain":      {"knob": "n_th",        "kappa1": 1e-3, "n_th": 0.0, "kappa_phi": 0.0, "kerr": 0.0},
    "rates-kerr":      {"knob": "kerr",        "kappa1": 1e-3, "n_th": 0.0, "kappa_phi": 0.0, "kerr": 0.0},
}
RATE_SCENARIOS = tuple(SCENARIO_DEFAULTS)
SCENARIOS = RATE_SCENARIOS + ("zgate", "prep", "circuit", "custom")
DEFAULT_RATE_METHOD = "auto"

# --- Z Gate ---
ZGATE_DRIVE_WARN = 0.3
ZGATE_DEFAULT_THETA = 3.141592653589793

# --- State Preparation (κ = 1) ---
PREP_DEFAULTS = {"mu0": 1.0, "mu1": 100.0, "nu": 200.0, "r": 0.2, "phi": 0.0, "t_final": 50.0, "n_th": 0.5}
PREP_INITIAL_STATES = ("vacuum", "fock1", "thermal")

# --- Custom Scenario ---
CUSTOM_INITIAL_STATES = ("zero", "one", "plus", "minus", "vacuum")

# --- Circuit Planner ---
VALIDITY_LIMIT = 0.2
WASTE_DIM = 5
WASTE_TOP_TOL = 1e-6
RESONANCE_TOL = 1e-6
LAMBDA_MAX = 0.3
KERR_REFERENCE_RATIO = 0.2   # |K/κ₂| ≈ 1/5 量測參考點

# --- CLI ---
FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4", "fig5")
EXIT_OK = 0
EXIT_CONFIG_INVALID = 2
EXIT_RUNTIME_FAILURE = 3
CSV_FLOAT_FORMAT = "%.10e"

# --- Plot Settings ---
PLOT_FORMAT = "svg"
PLOT_FIGSIZE = (6.0, 4.2)
PLOT_DPI = 100
R_COLOR_MAP = {
    0.0:  "#1f3b73",
    0.2:  "#3f7fbf",
    0.3:  "#5aa469",
    0.35: "#d9a441",
    0.5:  "#c0504d",
}
DEFAULT_LINE_COLOR = "#534847"
MODEL_LINE_STYLE = "--"
