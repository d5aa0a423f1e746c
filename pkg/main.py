"""
crackfield - 反平面裂纹晶格实验室
主程序入口
"""

import sys

from crackfield.ui.cli_app import create_app
from crackfield.utils.config import load_config
from crackfield.utils.logger import log


def main() -> int:
    """主函数"""
    log.info("启动 crackfield ...")

    config = load_config()
    log.debug(f"配置加载完成: {config}")

    app = create_app()
    return app.run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
