#!/usr/bin/env python3
"""
开发环境启动脚本

用于启动 EEGM2 推理服务（热重载）
"""

import os
import sys
from pathlib import Path

import uvicorn

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


def main():
    """启动开发服务器"""
    os.environ.setdefault("ENVIRONMENT", "development")
    host = os.getenv("EEGM2_HOST", "0.0.0.0")
    port = int(os.getenv("EEGM2_PORT", "8000"))

    print("🚀 启动 EEGM2 推理服务...")
    print(f"📁 项目根目录: {project_root}")
    print(f"🧠 检查点: {os.getenv('EEGM2_CHECKPOINT') or '未设置'}")
    print(f"🌐 服务地址: http://localhost:{port}")
    print(f"📚 API文档: http://localhost:{port}/docs")
    print("=" * 50)

    uvicorn.run(
        "app:app",
        host=host,
        port=port,
        reload=os.environ["ENVIRONMENT"] == "development",
        reload_dirs=[str(project_root)],
        log_level="info",
        access_log=True,
        use_colors=True,
        reload_excludes=["outputs/*", "logs/*", "*.log"],
    )


if __name__ == "__main__":
    main()
