import os
import sys
import logging
from dotenv import load_dotenv

load_dotenv()

logging_str = "[%(asctime)s: %(levelname)s: %(module)s: %(message)s]"

log_dir = os.getenv("CGCNN_LOG_DIR", "logs")
log_level = os.getenv("CGCNN_LOG_LEVEL", "INFO").upper()

log_filepath = os.path.join(log_dir, "cgcnn_logs.log")
os.makedirs(log_dir, exist_ok=True)

# stdout is reserved for the one-line command summary
logging.basicConfig(
    level=getattr(logging, log_level, logging.INFO),
    format=logging_str,

    handlers=[
        logging.FileHandler(log_filepath),
        logging.StreamHandler(sys.stderr)
    ]
)

logger = logging.getLogger("CGCNNLogger")
